"""
Chart-based Riemannian geometry kernel: metric evaluation, Christoffel
symbols, covariant derivatives, Levi-Civita transport, curvature, Ricci
tensor, geodesics and orthonormal frames.

Every manifold lives in a single chart. Fiber matrices are expressed in the
Gram-Schmidt frame of the coordinate basis unless stated otherwise.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from curves import CurvePath
from errors import DomainError, ExpressionError, MetricError, SpecError
from expressions import (Expr, Variable, ONE, ZERO, add, as_expr, compile_array,
                         mul, negate, parse_expr)
from integrators import check_steps, integrate, propagate_linear

logger = logging.getLogger(__name__)

DIFF_STEP = 1e-5
SYMMETRY_TOLERANCE = 1e-12
FRAME_TOLERANCE = 1e-10
VALIDATION_POINTS = 1000


class ManifoldSpec:
    """
    Riemannian manifold given by metric component expressions in one chart.

    Args:
        name: Identifier used in reports
        dim: Dimension n
        metric: n x n nested list of expressions (strings or Expr)
        coordinates: Coordinate names, default x1..xn
        frame: Optional n vector fields, frame[a][k] = k-th component of field a
        chart_domain: Per-coordinate open intervals (lo, hi), default the whole line
        builtin_tag: Name of the built-in this spec was expanded from
        base_point: Default base point for holonomy computations
        validate: Run the symmetry / positivity / frame checks at construction
    """

    def __init__(self, name: str, dim: int, metric: Sequence[Sequence], coordinates: Optional[Sequence[str]] = None,
                 frame: Optional[Sequence[Sequence]] = None, chart_domain: Optional[Sequence[Sequence[float]]] = None,
                 builtin_tag: Optional[str] = None, base_point: Optional[Sequence[float]] = None,
                 validate: bool = True):
        self.name = name
        self.dim = int(dim)
        if self.dim < 1:
            raise SpecError(f"dimension must be positive, got {dim}")
        n = self.dim
        self.coordinates = tuple(coordinates) if coordinates else tuple(f"x{i + 1}" for i in range(n))
        if len(self.coordinates) != n or len(set(self.coordinates)) != n:
            raise SpecError("coordinate names must be n distinct identifiers")
        self.index = _variable_index(self.coordinates)

        if len(metric) != n or any(len(row) != n for row in metric):
            raise SpecError(f"metric must be a {n}x{n} matrix")
        self.metric = [[as_expr(entry, self.index) for entry in row] for row in metric]

        self.frame = None
        if frame is not None:
            if len(frame) != n or any(len(field) != n for field in frame):
                raise SpecError(f"frame must list {n} vector fields with {n} components each")
            self.frame = [[as_expr(entry, self.index) for entry in field] for field in frame]

        if chart_domain is None:
            chart_domain = [(-np.inf, np.inf)] * n
        self.chart_domain = np.array(chart_domain, dtype=float).reshape(n, 2)
        if np.any(self.chart_domain[:, 0] >= self.chart_domain[:, 1]):
            raise SpecError("every chart interval needs lo < hi")
        self.builtin_tag = builtin_tag

        self._metric_batch = compile_array([entry for row in self.metric for entry in row], self.index)
        if self.frame is not None:
            self._frame_batch = compile_array([entry for field in self.frame for entry in field], self.index)

        self.base_point = np.asarray(base_point, dtype=float) if base_point is not None else self._default_base()
        if not self.contains(self.base_point):
            raise DomainError(f"base point {self.base_point.tolist()} lies outside the chart domain")
        if validate:
            self.validate()

    def __repr__(self):
        return f"ManifoldSpec(name={self.name!r}, dim={self.dim})"

    def _default_base(self) -> np.ndarray:
        base = []
        for lo, hi in self.chart_domain:
            if lo < 0.0 < hi:
                base.append(0.0)
            elif np.isfinite(lo) and np.isfinite(hi):
                base.append(0.5 * (lo + hi))
            elif np.isfinite(lo):
                base.append(lo + 1.0)
            else:
                base.append(hi - 1.0)
        return np.array(base)

    # chart domain

    def contains(self, x: Sequence[float], margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        lo, hi = self.chart_domain[:, 0], self.chart_domain[:, 1]
        return bool(np.all(x - margin > lo) and np.all(x + margin < hi))

    def require_inside(self, x: Sequence[float], margin: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise SpecError(f"expected a point with {self.dim} coordinates, got shape {x.shape}")
        if not self.contains(x, margin):
            raise DomainError(f"point {x.tolist()} is outside the chart domain of {self.name}")
        return x

    def random_points(self, count: int, seed: int = 0, radius: float = 1.0,
                      center: Optional[Sequence[float]] = None) -> np.ndarray:
        """Uniform samples in the box of half-width radius around center, clipped to the domain."""
        center = self.base_point if center is None else np.asarray(center, dtype=float)
        lo = np.maximum(self.chart_domain[:, 0], center - radius)
        hi = np.minimum(self.chart_domain[:, 1], center + radius)
        inset = 1e-3 * (hi - lo)
        rng = np.random.default_rng(seed)
        return rng.uniform(lo + inset, hi - inset, size=(count, self.dim))

    # batched evaluation

    def metric_batch(self, X: np.ndarray) -> np.ndarray:
        values = self._metric_batch(X)
        if not np.all(np.isfinite(values)):
            raise ExpressionError(f"metric of {self.name} is not finite at the requested points")
        return values.reshape(values.shape[:-1] + (self.dim, self.dim))

    def frame_batch(self, X: np.ndarray) -> np.ndarray:
        """Frame fields as columns: result[..., k, a] is component k of field a."""
        if self.frame is None:
            raise SpecError(f"{self.name} declares no frame")
        values = self._frame_batch(X)
        if not np.all(np.isfinite(values)):
            raise ExpressionError(f"frame of {self.name} is not finite at the requested points")
        values = values.reshape(values.shape[:-1] + (self.dim, self.dim))
        return np.swapaxes(values, -1, -2)

    def partial(self, expr: Expr, l: int) -> Expr:
        """Symbolic derivative along coordinate l, aliases included."""
        result = ZERO
        for name, column in self.index.items():
            if column == l:
                result = add(result, expr.diff(name))
        return result

    @cached_property
    def _gradient_batch(self):
        n = self.dim
        exprs = [self.partial(self.metric[i][j], l) for l in range(n) for i in range(n) for j in range(n)]
        return compile_array(exprs, self.index)

    @cached_property
    def _hessian_batch(self):
        n = self.dim
        first = [[[self.partial(self.metric[i][j], l) for j in range(n)] for i in range(n)] for l in range(n)]
        exprs = [self.partial(first[m][i][j], l)
                 for l in range(n) for m in range(n) for i in range(n) for j in range(n)]
        return compile_array(exprs, self.index)

    def metric_jet(self, x: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Metric with its first and second partial derivatives, differentiated symbolically.

        Returns:
            (g, dg, d2g) with dg[l, i, j] = d_l g_ij and d2g[l, m, i, j] = d_l d_m g_ij
        """
        n = self.dim
        x = self.require_inside(x)
        g = self.metric_batch(x)
        dg = self._gradient_batch(x).reshape(n, n, n)
        d2g = self._hessian_batch(x).reshape(n, n, n, n)
        if not (np.all(np.isfinite(dg)) and np.all(np.isfinite(d2g))):
            raise ExpressionError(f"metric derivatives of {self.name} are not finite at {x.tolist()}")
        return g, dg, d2g

    # invariants

    def validate(self, points: int = VALIDATION_POINTS, seed: int = 0):
        """
        Check symmetry and positive definiteness of the metric, and orthonormality
        of the declared frame, at random domain points.
        """
        n = self.dim
        X = self.random_points(points, seed)
        G = self.metric_batch(X)
        for i in range(n):
            for j in range(i + 1, n):
                if str(self.metric[i][j]) == str(self.metric[j][i]):
                    continue
                defect = np.max(np.abs(G[:, i, j] - G[:, j, i]))
                if defect > SYMMETRY_TOLERANCE:
                    raise MetricError(f"metric entries ({i},{j}) and ({j},{i}) differ by {defect:.3e}")
        smallest = np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G, 1, 2)))[:, 0]
        if np.min(smallest) <= 0.0:
            bad = X[int(np.argmin(smallest))]
            raise MetricError(f"metric of {self.name} is not positive definite at {bad.tolist()}")
        if self.frame is not None:
            sample = X[:100]
            F = self.frame_batch(sample)
            gram = np.einsum('pka,pkl,plb->pab', F, G[:100], F)
            defect = np.max(np.abs(gram - np.eye(n)))
            if defect > FRAME_TOLERANCE:
                raise MetricError(f"declared frame is not orthonormal (Gram defect {defect:.3e})")
        logger.debug("validated %s at %d points", self.name, points)

    def describe(self) -> Dict:
        document = {
            'name': self.name,
            'dim': self.dim,
            'coordinates': list(self.coordinates),
            'metric': [[str(entry) for entry in row] for row in self.metric],
            'domain': [[_json_bound(lo), _json_bound(hi)] for lo, hi in self.chart_domain],
            'base_point': self.base_point.tolist(),
        }
        if self.frame is not None:
            document['frame'] = [[str(entry) for entry in field] for field in self.frame]
        if self.builtin_tag:
            document['builtin'] = self.builtin_tag
        return document


def _json_bound(value: float):
    if np.isinf(value):
        return None
    return float(value)


def _variable_index(coordinates: Sequence[str]) -> Dict[str, int]:
    index = {name: i for i, name in enumerate(coordinates)}
    indexed = [name for name in coordinates if name.startswith('x') and name[1:].isdigit()]
    if len(indexed) <= 3:
        for alias, name in zip('xyz', ('x1', 'x2', 'x3')):
            if name in index and alias not in index:
                index[alias] = index[name]
    return index


@dataclass
class CurvatureEndomorphism:
    """Curvature map on a fiber, stored in the orthonormal fiber basis."""
    base: np.ndarray
    plane: Tuple[np.ndarray, np.ndarray]
    matrix: np.ndarray
    gram: np.ndarray

    def skew_defect(self) -> float:
        M, eta = self.matrix, self.gram
        return float(np.max(np.abs(M.T @ eta + eta @ M)))


class TensorField:
    """Tensor field on a chart, evaluated point by point."""

    def __init__(self, function: Callable[[np.ndarray], np.ndarray]):
        self.function = function

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        return np.asarray(self.function(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def from_expressions(cls, spec: ManifoldSpec, components) -> 'TensorField':
        """Vector field from n expressions, or endomorphism field from n x n expressions (row = output index)."""
        array = np.array(components, dtype=object)
        exprs = [as_expr(entry, spec.index) for entry in array.ravel()]
        compiled = compile_array(exprs, spec.index)
        shape = array.shape

        def evaluate(x):
            values = compiled(x)
            if not np.all(np.isfinite(values)):
                raise ExpressionError("field expression is not finite")
            return values.reshape(shape)

        return cls(evaluate)

    @classmethod
    def constant(cls, value) -> 'TensorField':
        value = np.asarray(value, dtype=float)
        return cls(lambda x: value)


def as_field(spec: ManifoldSpec, value) -> TensorField:
    if isinstance(value, TensorField):
        return value
    if callable(value):
        return TensorField(value)
    array = np.array(value, dtype=object)
    if array.dtype == object and any(isinstance(entry, (str, Expr)) for entry in array.ravel()):
        return TensorField.from_expressions(spec, value)
    return TensorField.constant(np.array(value, dtype=float))


def frame_field(spec: ManifoldSpec, a: int) -> TensorField:
    """The a-th declared frame field."""
    return TensorField.from_expressions(spec, spec.frame[a])


# operations

def eval_metric(spec: ManifoldSpec, x: Sequence[float]) -> np.ndarray:
    """
    Metric matrix at a point.

    Args:
        spec: Manifold
        x: Point in the chart domain

    Returns:
        Symmetric positive definite n x n matrix g(x)
    """
    x = spec.require_inside(x)
    g = spec.metric_batch(x)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise MetricError(f"metric of {spec.name} is not positive definite at {x.tolist()}")
    return g


def _difference_steps(x: np.ndarray, step: float) -> np.ndarray:
    return step * np.maximum(1.0, np.abs(x))


def metric_derivatives(spec: ManifoldSpec, x: Sequence[float], step: float = DIFF_STEP,
                       order: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """
    Metric and its partial derivatives by central differences.

    Args:
        order: 2 for the three-point stencil, 4 for the five-point stencil

    Returns:
        (g, dg) with dg[l, i, j] = d_l g_ij
    """
    x = np.asarray(x, dtype=float)
    n = spec.dim
    h = _difference_steps(x, step)
    spec.require_inside(x, margin=2.0 * np.max(h))
    shifts = np.diag(h)
    if order == 2:
        points = np.concatenate([x[None], x + shifts, x - shifts])
        G = spec.metric_batch(points)
        dg = (G[1:n + 1] - G[n + 1:]) / (2.0 * h)[:, None, None]
    elif order == 4:
        points = np.concatenate([x[None], x + shifts, x - shifts, x + 2 * shifts, x - 2 * shifts])
        G = spec.metric_batch(points)
        plus, minus = G[1:n + 1], G[n + 1:2 * n + 1]
        plus2, minus2 = G[2 * n + 1:3 * n + 1], G[3 * n + 1:]
        dg = (8.0 * (plus - minus) - (plus2 - minus2)) / (12.0 * h)[:, None, None]
    else:
        raise ValueError("order must be 2 or 4")
    return G[0], dg


def _christoffel_terms(dg: np.ndarray) -> np.ndarray:
    # T[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    return dg + np.einsum('jil->ijl', dg) - np.einsum('lij->ijl', dg)


def _christoffel_from(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError:
        raise MetricError("metric is singular")
    if np.linalg.cond(g) > 1e12:
        raise MetricError(f"metric is near-singular (condition number {np.linalg.cond(g):.3e})")
    gamma = 0.5 * np.einsum('kl,ijl->kij', ginv, _christoffel_terms(dg))
    return 0.5 * (gamma + np.swapaxes(gamma, 1, 2))


def christoffel(spec: ManifoldSpec, x: Sequence[float], step: float = DIFF_STEP, order: int = 2) -> np.ndarray:
    """
    Christoffel symbols of the Levi-Civita connection.

    Args:
        spec: Manifold
        x: Point at least two differentiation steps inside the domain
        step: Central-difference step, relative to |x_i| when |x_i| > 1
        order: Stencil order, 2 by default, 4 for a reference value

    Returns:
        Array gamma[k, i, j] = Gamma^k_ij
    """
    g, dg = metric_derivatives(spec, x, step, order)
    return _christoffel_from(g, dg)


def christoffel_jet(spec: ManifoldSpec, x: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Christoffel symbols and their first derivatives from the symbolic metric jet.

    Returns:
        (g, gamma, dgamma) with dgamma[l, k, i, j] = d_l Gamma^k_ij
    """
    g, dg, d2g = spec.metric_jet(x)
    ginv = np.linalg.inv(g)
    terms = _christoffel_terms(dg)
    gamma = 0.5 * np.einsum('kl,ijl->kij', ginv, terms)
    d_terms = d2g + np.einsum('ljim->lijm', d2g) - np.einsum('lmij->lijm', d2g)
    d_ginv = -np.einsum('ka,lab,bm->lkm', ginv, dg, ginv)
    dgamma = 0.5 * (np.einsum('lkm,ijm->lkij', d_ginv, terms) + np.einsum('km,lijm->lkij', ginv, d_terms))
    return g, gamma, dgamma


def riemann_tensor(spec: ManifoldSpec, x: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Riemann tensor in coordinates.

    Returns:
        (g, Rm) with Rm[k, l, i, j] the k-component of R(d_i, d_j) d_l
    """
    g, gamma, dgamma = christoffel_jet(spec, x)
    Rm = (np.einsum('ikjl->klij', dgamma) - np.einsum('jkil->klij', dgamma)
          + np.einsum('kim,mjl->klij', gamma, gamma) - np.einsum('kjm,mil->klij', gamma, gamma))
    return g, Rm


def orthonormal_frame(spec: ManifoldSpec, x: Sequence[float]) -> np.ndarray:
    """
    Gram-Schmidt of the coordinate basis with respect to g(x), in coordinate order.

    Returns:
        n x n matrix whose columns are the frame vectors in coordinates
    """
    g = eval_metric(spec, x)
    return _frame_from_metric(g)


def _frame_from_metric(g: np.ndarray) -> np.ndarray:
    L = cholesky(g, lower=True)
    return solve_triangular(L, np.eye(g.shape[0]), lower=True).T


def covariant_derivative_field(spec: ManifoldSpec, V, W, x: Sequence[float], step: float = DIFF_STEP) -> np.ndarray:
    """
    Covariant derivative (nabla_V W)(x).

    Args:
        spec: Manifold
        V: Direction field (expressions, callable or TensorField)
        W: Differentiated field (expressions, callable or TensorField)
        x: Point

    Returns:
        Tangent vector in coordinates
    """
    x = np.asarray(x, dtype=float)
    V, W = as_field(spec, V), as_field(spec, W)
    v = V(x)
    gamma = christoffel(spec, x)
    result = np.einsum('kij,i,j->k', gamma, v, W(x))
    norm = np.max(np.abs(v))
    if norm > 0.0:
        h = step * max(1.0, np.max(np.abs(x))) / norm
        result += (W(x + h * v) - W(x - h * v)) / (2.0 * h)
    return result


def _levi_civita_generator(spec: ManifoldSpec):
    def generator(x, xdot):
        return -np.einsum('kij,i->kj', christoffel(spec, x), xdot)
    return generator


def levi_civita_operator(spec: ManifoldSpec, curve: CurvePath, steps: Optional[int] = None) -> np.ndarray:
    """Transport matrix along the curve in the coordinate bases of its endpoints."""
    steps = check_steps(steps or curve.steps_per_segment)
    Y, _ = propagate_linear(_levi_civita_generator(spec), curve, spec.dim, steps)
    return Y


def levi_civita_transport(spec: ManifoldSpec, curve: CurvePath, v0: Sequence[float],
                          steps: Optional[int] = None) -> np.ndarray:
    """
    Parallel transport of a tangent vector along a curve.

    Solves v' + Gamma(x', v) = 0 with the fixed-step fourth-order scheme.

    Args:
        spec: Manifold
        curve: Curve inside the chart domain
        v0: Vector at the start, in coordinates
        steps: Steps per segment, default the curve's own count

    Returns:
        Transported vector at the curve end
    """
    return levi_civita_operator(spec, curve, steps) @ np.asarray(v0, dtype=float)


def riemann_endomorphism(spec: ManifoldSpec, x: Sequence[float], X: Sequence[float],
                         Y: Sequence[float]) -> CurvatureEndomorphism:
    """
    Curvature R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y] at a point.

    Returns:
        CurvatureEndomorphism in the orthonormal frame at x
    """
    x = np.asarray(x, dtype=float)
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    g, Rm = riemann_tensor(spec, x)
    E = _frame_from_metric(g)
    M = np.einsum('klij,i,j->kl', Rm, X, Y)
    matrix = np.linalg.solve(E, M @ E)
    return CurvatureEndomorphism(x, (X, Y), matrix, np.eye(spec.dim))


def ricci(spec: ManifoldSpec, x: Sequence[float], frame: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Ricci tensor Ric(X, Y) = tr(W -> R(W, X) Y) in an orthonormal frame.

    Args:
        spec: Manifold
        x: Point
        frame: Columns of an orthonormal frame; defaults to the declared frame,
            else the Gram-Schmidt frame

    Returns:
        Symmetric n x n matrix
    """
    x = np.asarray(x, dtype=float)
    g, Rm = riemann_tensor(spec, x)
    if frame is None:
        frame = spec.frame_batch(x) if spec.frame is not None else _frame_from_metric(g)
    frame = np.asarray(frame, dtype=float)
    defect = np.max(np.abs(frame.T @ g @ frame - np.eye(spec.dim)))
    if defect > 1e-8:
        raise MetricError(f"frame is not orthonormal (Gram defect {defect:.3e})")
    coordinate_ricci = np.einsum('ilij->jl', Rm)
    return frame.T @ coordinate_ricci @ frame


def geodesic(spec: ManifoldSpec, x: Sequence[float], v: Sequence[float], T: float, steps: int = 512,
             return_velocity: bool = False):
    """
    Integrate the geodesic equation x'' + Gamma(x', x') = 0 up to time T.

    Returns:
        End point, or (end point, end velocity) when return_velocity is set
    """
    n = spec.dim
    x = spec.require_inside(x)

    def rhs(t, y):
        position, velocity = y[:n], y[n:]
        if not spec.contains(position):
            raise DomainError(f"geodesic left the chart domain at {position.tolist()}")
        return np.concatenate([velocity, -np.einsum('kij,i,j->k', christoffel(spec, position), velocity, velocity)])

    y = integrate(rhs, np.concatenate([x, np.asarray(v, dtype=float)]), 0.0, float(T), steps)
    if return_velocity:
        return y[:n], y[n:]
    return y[:n]


def sectional_curvature(spec: ManifoldSpec, x: Sequence[float], X: Sequence[float], Y: Sequence[float]) -> float:
    g, Rm = riemann_tensor(spec, x)
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    RYY = np.einsum('klij,i,j,l->k', Rm, X, Y, Y)
    area = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    return float(X @ g @ RYY / area)


def constant_curvature_defect(spec: ManifoldSpec, x: Sequence[float], kappa: float = 1.0) -> float:
    """Max deviation of R(X,Y)W from kappa (g(Y,W)X - g(X,W)Y) over an orthonormal frame."""
    g, Rm = riemann_tensor(spec, x)
    E = _frame_from_metric(g)
    R = np.einsum('klij,ia,jb,lc->kabc', Rm, E, E, E)
    R = np.einsum('ka,kbcd->abcd', g @ E, R)
    n = spec.dim
    delta = np.eye(n)
    # R[a, b, c, d] = g(E_a, R(E_b, E_c) E_d)
    model = kappa * (np.einsum('ab,cd->abcd', delta, delta) - np.einsum('ac,bd->abcd', delta, delta))
    return float(np.max(np.abs(R - model)))


def einstein_defect(spec: ManifoldSpec, x: Sequence[float], factor: float) -> float:
    """Max |Ric - factor * g| in an orthonormal frame."""
    return float(np.max(np.abs(ricci(spec, x) - factor * np.eye(spec.dim))))


# embedding oracle for the round sphere

def stereographic_embedding(u: Sequence[float], radius: float = 1.0) -> np.ndarray:
    """Chart point -> point of the sphere in R^{n+1}; projection from the north pole."""
    u = np.asarray(u, dtype=float)
    q = 1.0 + u @ u
    return radius * np.concatenate([2.0 * u / q, [(u @ u - 1.0) / q]])


def stereographic_chart(p: Sequence[float], radius: float = 1.0) -> np.ndarray:
    p = np.asarray(p, dtype=float) / radius
    return p[:-1] / (1.0 - p[-1])


def stereographic_jacobian(u: Sequence[float], radius: float = 1.0) -> np.ndarray:
    """(n+1) x n derivative of the embedding."""
    u = np.asarray(u, dtype=float)
    q = 1.0 + u @ u
    top = 2.0 * np.eye(len(u)) / q - 4.0 * np.outer(u, u) / q ** 2
    bottom = 4.0 * u / q ** 2
    return radius * np.vstack([top, bottom[None, :]])


# built-in manifolds

def euclidean(n: int) -> ManifoldSpec:
    metric = [['1' if i == j else '0' for j in range(n)] for i in range(n)]
    return ManifoldSpec(f"euclidean{n}", n, metric, frame=metric, builtin_tag=f"euclidean:{n}")


def sphere(n: int, radius: float = 1.0) -> ManifoldSpec:
    """Round sphere of the given radius in the stereographic chart from the north pole."""
    coordinates = [f"x{i + 1}" for i in range(n)]
    squares = ' + '.join(f"{name}^2" for name in coordinates)
    factor = parse_expr(f"4 * {float(radius) ** 2!r} / (1 + {squares})^2", coordinates)
    metric = [[factor if i == j else ZERO for j in range(n)] for i in range(n)]
    return ManifoldSpec(f"sphere{n}", n, metric, coordinates,
                        builtin_tag=f"sphere:{n}:radius={float(radius):g}")


def hyperbolic(n: int) -> ManifoldSpec:
    """Hyperbolic space as the upper half-space x_n > 0."""
    coordinates = [f"x{i + 1}" for i in range(n)]
    height = coordinates[-1]
    factor = parse_expr(f"1 / {height}^2", coordinates)
    metric = [[factor if i == j else ZERO for j in range(n)] for i in range(n)]
    frame = [[Variable(height) if k == a else ZERO for k in range(n)] for a in range(n)]
    domain = [(-np.inf, np.inf)] * (n - 1) + [(0.0, np.inf)]
    return ManifoldSpec(f"hyperbolic{n}", n, metric, coordinates, frame, domain,
                        builtin_tag=f"hyperbolic:{n}")


def heisenberg(m: int = 1) -> ManifoldSpec:
    """
    Heisenberg group of dimension 2m+1 in coordinates (x_1, y_1, ..., x_m, y_m, z),
    with the metric that makes X_i = d/dx_i - y_i d/dz, Y_i = d/dy_i + x_i d/dz and
    Z = d/dz orthonormal.
    """
    n = 2 * m + 1
    coordinates = [f"x{i + 1}" for i in range(n)]
    z = n - 1
    # coframe dual to (X_1, Y_1, ..., Z): dx_i, dy_i and dz + sum(y_i dx_i - x_i dy_i)
    coframe = [[ONE if k == a else ZERO for k in range(n)] for a in range(n - 1)]
    contact = [ZERO] * n
    for i in range(m):
        x_i, y_i = 2 * i, 2 * i + 1
        contact[x_i] = Variable(coordinates[y_i])
        contact[y_i] = negate(Variable(coordinates[x_i]))
    contact[z] = ONE
    coframe.append(contact)
    metric = [[_sum_products(coframe, k, l) for l in range(n)] for k in range(n)]

    frame = []
    for i in range(m):
        x_i, y_i = 2 * i, 2 * i + 1
        X = [ZERO] * n
        X[x_i], X[z] = ONE, negate(Variable(coordinates[y_i]))
        Y = [ZERO] * n
        Y[y_i], Y[z] = ONE, Variable(coordinates[x_i])
        frame.extend([X, Y])
    frame.append([ONE if k == z else ZERO for k in range(n)])
    return ManifoldSpec(f"heisenberg{m}", n, metric, coordinates, frame, builtin_tag=f"heisenberg:m={m}")


def _sum_products(coframe: List[List[Expr]], k: int, l: int) -> Expr:
    total = ZERO
    for row in coframe:
        total = add(total, mul(row[k], row[l]))
    return total
