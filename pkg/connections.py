"""
The rolling connection on TM + R, its fiber metric, transport and curvature,
together with the Riemannian cone C(M) and the check that cone holonomy and
rolling holonomy agree.

A section (X, r) is parallel along x(t) when

    X' + Gamma(x', X) + r x' = 0,    r' - c g(X, x') = 0,

which in coordinates is s' = -x'^i Omega_i s with
Omega_i = [[Gamma_i, e_i], [-c g(e_i, .), 0]].
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag, logm

from curves import CurvePath, Segment
from errors import DomainError, SpecError
from expressions import ONE, ZERO, div, mul, parse_expr
from geometry import (DIFF_STEP, CurvatureEndomorphism, ManifoldSpec, TensorField, _christoffel_from,
                      _frame_from_metric, as_field, covariant_derivative_field, eval_metric,
                      levi_civita_operator, metric_derivatives, riemann_tensor)
from integrators import check_steps, propagate_linear

logger = logging.getLogger(__name__)

DEFAULT_S_RANGE = (0.25, 4.0)


class FiberMetric:
    """Fiber inner product h_c(X + r, Y + s) = g(X, Y) + rs / c, c in {-1, +1}."""

    def __init__(self, c: float):
        if c not in (1, -1):
            raise SpecError(f"curvature parameter must be +1 or -1, got {c}")
        self.c = int(c)

    def gram(self, n: int) -> np.ndarray:
        """Gram matrix in the orthonormal-frame + scalar basis."""
        eta = np.eye(n + 1)
        eta[n, n] = 1.0 / self.c
        return eta

    def coordinate_gram(self, g: np.ndarray) -> np.ndarray:
        return block_diag(g, [[1.0 / self.c]])

    def preservation_defect(self, matrix: np.ndarray) -> float:
        eta = self.gram(matrix.shape[0] - 1)
        return float(np.max(np.abs(matrix.T @ eta @ matrix - eta)))


@dataclass
class FiberVector:
    """Element (X, r) of TM + R over a base point, X in coordinates."""
    base: np.ndarray
    tangent_part: np.ndarray
    scalar_part: float

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.tangent_part = np.asarray(self.tangent_part, dtype=float)
        self.scalar_part = float(self.scalar_part)
        if not (np.all(np.isfinite(self.tangent_part)) and np.isfinite(self.scalar_part)):
            raise SpecError("fiber vector has non-finite entries")

    def as_array(self) -> np.ndarray:
        return np.append(self.tangent_part, self.scalar_part)


@dataclass
class TransportOperator:
    """Parallel transport of the rolling connection in the frame + scalar bases of the endpoints."""
    c: int
    start: np.ndarray
    end: np.ndarray
    matrix: np.ndarray
    steps_used: int
    coordinate_matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def preservation_defect(self) -> float:
        return FiberMetric(self.c).preservation_defect(self.matrix)


def fiber_basis(spec: ManifoldSpec, x: Sequence[float]) -> np.ndarray:
    """Columns: orthonormal frame of T_xM, then the unit scalar slot."""
    return block_diag(_frame_from_metric(eval_metric(spec, x)), [[1.0]])


def to_fiber_frame(spec: ManifoldSpec, x: Sequence[float], matrix: np.ndarray) -> np.ndarray:
    """Express a coordinate endomorphism of the fiber at x in the fiber basis."""
    B = fiber_basis(spec, x)
    return np.linalg.solve(B, matrix @ B)


def connection_matrix(g: np.ndarray, gamma: np.ndarray, c: int, velocity: np.ndarray) -> np.ndarray:
    """Omega(v) = sum_i v^i Omega_i in coordinates."""
    n = g.shape[0]
    omega = np.zeros((n + 1, n + 1))
    omega[:n, :n] = np.einsum('kij,i->kj', gamma, velocity)
    omega[:n, n] = velocity
    omega[n, :n] = -c * (g @ velocity)
    return omega


def rolling_generator(spec: ManifoldSpec, c: int):
    """Generator of the transport ODE, for use with propagate_linear."""

    def generator(position, velocity):
        g, dg = metric_derivatives(spec, position)
        return -connection_matrix(g, _christoffel_from(g, dg), c, velocity)

    return generator


def _check_curve(spec: ManifoldSpec, curve: CurvePath):
    if curve.dim != spec.dim:
        raise SpecError(f"curve has {curve.dim} coordinates, {spec.name} has {spec.dim}")
    for point in curve.sample(16):
        if not spec.contains(point):
            raise DomainError(f"curve leaves the chart domain of {spec.name} at {point.tolist()}")


def rolling_derivative(spec: ManifoldSpec, c: int, section, Y: Sequence[float], x: Sequence[float],
                       step: float = DIFF_STEP) -> FiberVector:
    """
    Rolling covariant derivative of a section along a tangent vector.

    Args:
        spec: Manifold
        c: Curvature parameter
        section: Pair (X-field, r-field); fields are expressions, callables or TensorFields
        Y: Direction, in coordinates
        x: Point

    Returns:
        (nabla_Y X + r(x) Y, Y(r) - c g(X_x, Y))
    """
    c = FiberMetric(c).c
    x = spec.require_inside(x)
    Y = np.asarray(Y, dtype=float)
    X_field, r_field = section
    X_field = as_field(spec, X_field)
    r_field = _scalar_field(spec, r_field)
    r = float(r_field(x))
    tangent = covariant_derivative_field(spec, Y, X_field, x, step) + r * Y
    norm = np.max(np.abs(Y))
    derivative = 0.0
    if norm > 0.0:
        h = step * max(1.0, np.max(np.abs(x))) / norm
        derivative = float(r_field(x + h * Y) - r_field(x - h * Y)) / (2.0 * h)
    g = eval_metric(spec, x)
    scalar = derivative - c * float(X_field(x) @ g @ Y)
    return FiberVector(x, tangent, scalar)


def _scalar_field(spec: ManifoldSpec, value) -> TensorField:
    if isinstance(value, (list, tuple)):
        raise SpecError("scalar field expected")
    inner = TensorField(value) if callable(value) else as_field(spec, [value])
    return TensorField(lambda x: np.asarray(inner(x)).reshape(-1)[0])


def fiber_inner(c: int, u: FiberVector, v: FiberVector, spec: Optional[ManifoldSpec] = None) -> float:
    """
    h_c(u, v) = g(X, Y) + rs / c.

    Tangent parts are in coordinates when a spec is given, otherwise in an
    orthonormal frame.
    """
    metric = FiberMetric(c)
    if u.base.shape != v.base.shape or np.max(np.abs(u.base - v.base)) > 0.0:
        raise SpecError("fiber vectors live over different base points")
    if spec is None:
        tangent = float(u.tangent_part @ v.tangent_part)
    else:
        tangent = float(u.tangent_part @ eval_metric(spec, u.base) @ v.tangent_part)
    return tangent + u.scalar_part * v.scalar_part / metric.c


def rolling_transport(spec: ManifoldSpec, c: int, curve: CurvePath, steps: Optional[int] = None,
                      record_every: int = 0):
    """
    Parallel transport of the rolling connection along a curve.

    Args:
        spec: Manifold
        c: Curvature parameter of the model space, +1 or -1
        curve: Curve inside the chart domain
        steps: Steps per segment, default the curve's own count
        record_every: When positive, also return (point, coordinate transport) samples

    Returns:
        TransportOperator, or (TransportOperator, records) when record_every is set
    """
    c = FiberMetric(c).c
    _check_curve(spec, curve)
    steps = check_steps(steps or curve.steps_per_segment)
    Y, records = propagate_linear(rolling_generator(spec, c), curve, spec.dim + 1, steps, record_every)
    B0 = fiber_basis(spec, curve.start)
    B1 = fiber_basis(spec, curve.end)
    operator = TransportOperator(c, curve.start, curve.end, np.linalg.solve(B1, Y @ B0), steps, Y)
    if record_every > 0:
        return operator, records
    return operator


def curvature_forms(spec: ManifoldSpec, c: int, x: Sequence[float]) -> np.ndarray:
    """
    Coordinate curvature matrices of the rolling connection for every plane.

    Returns:
        F[i, j] = F(d_i, d_j) as an (n+1) x (n+1) coordinate matrix
    """
    c = FiberMetric(c).c
    n = spec.dim
    g, Rm = riemann_tensor(spec, x)
    # (X ^ Y) V = g(Y, V) X - g(X, V) Y on coordinate fields
    wedge = np.einsum('ki,jl->klij', np.eye(n), g) - np.einsum('kj,il->klij', np.eye(n), g)
    F = np.zeros((n, n, n + 1, n + 1))
    F[:, :, :n, :n] = np.einsum('klij->ijkl', Rm - c * wedge)
    return F


def rolling_curvature(spec: ManifoldSpec, c: int, x: Sequence[float], X: Sequence[float],
                      Y: Sequence[float]) -> CurvatureEndomorphism:
    """
    Curvature of the rolling connection, F(X, Y) = (R(X, Y) - c X ^ Y, 0).

    Returns:
        CurvatureEndomorphism in the fiber basis at x, with the h_c Gram matrix
    """
    c = FiberMetric(c).c
    x = spec.require_inside(x)
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    F = np.einsum('ijab,i,j->ab', curvature_forms(spec, c, x), X, Y)
    return CurvatureEndomorphism(x, (X, Y), to_fiber_frame(spec, x, F), FiberMetric(c).gram(spec.dim))


def loop_curvature(spec: ManifoldSpec, c: int, x: Sequence[float], i: int, j: int,
                   delta: float = 1e-3, steps: int = 16) -> np.ndarray:
    """Curvature in the (i, j) plane read off the transport around a small coordinate square."""
    square = CurvePath.rectangle(x, i, j, delta, steps)
    operator = rolling_transport(spec, c, square)
    return -np.real(logm(operator.matrix)) / delta ** 2


# Riemannian cone

class ConeSpec(ManifoldSpec):
    """Cone s^2 g + ds^2 over a base manifold, with s restricted to a compact interval."""

    def __init__(self, base: ManifoldSpec, s_range: Tuple[float, float] = DEFAULT_S_RANGE):
        lo, hi = (float(v) for v in s_range)
        if not (0.0 < lo < hi < np.inf):
            raise SpecError(f"cone range must satisfy 0 < lo < hi < inf, got {s_range}")
        if 's' in base.coordinates:
            raise SpecError("the base manifold already uses the coordinate name 's'")
        n = base.dim
        s = parse_expr('s', ('s',))
        s2 = parse_expr('s^2', ('s',))
        metric = [[mul(s2, base.metric[i][j]) for j in range(n)] + [ZERO] for i in range(n)]
        metric.append([ZERO] * n + [ONE])
        frame = None
        if base.frame is not None:
            frame = [[div(entry, s) for entry in vector] + [ZERO] for vector in base.frame]
            frame.append([ZERO] * n + [ONE])
        domain = np.vstack([base.chart_domain, [[lo, hi]]])
        s0 = 1.0 if lo < 1.0 < hi else 0.5 * (lo + hi)
        super().__init__(f"cone({base.name})", n + 1, metric, list(base.coordinates) + ['s'], frame, domain,
                         builtin_tag=f"cone:{base.builtin_tag or base.name}",
                         base_point=np.append(base.base_point, s0))
        self.base_spec = base
        self.s_range = (lo, hi)


def cone_spec(spec: ManifoldSpec, s_range: Tuple[float, float] = DEFAULT_S_RANGE) -> ConeSpec:
    """Riemannian cone C(M) in coordinates (x, s)."""
    return ConeSpec(spec, s_range)


def cone_covariant(cone: ConeSpec, section, direction: Union[str, Sequence[float]], point: Sequence[float],
                   step: float = DIFF_STEP) -> np.ndarray:
    """
    Cone covariant derivative of Y + b d_s from the warped-product rules:

        nabla_X (Y + b d_s) = nabla_X Y + (b / s) X + (X(b) - s g(X, Y)) d_s
        nabla_{d_s} (Y + b d_s) = Y / s + d_s Y + d_s(b) d_s

    Args:
        cone: Cone spec
        section: (Y-field, b-field) as functions of the cone point
        direction: 'ds', or a tangent vector X of the base
        point: Cone point (x, s)

    Returns:
        Cone tangent vector of length n + 1
    """
    point = np.asarray(point, dtype=float)
    n = cone.base_spec.dim
    x, s = point[:n], point[n]
    if s <= 0.0:
        raise DomainError(f"cone coordinate must be positive, got {s}")
    cone.require_inside(point)
    Y_field, b_field = section
    Y_field = as_field(cone, Y_field)
    b_field = _scalar_field(cone, b_field)
    Y, b = Y_field(point), float(b_field(point))

    def along(v: np.ndarray):
        h = step * max(1.0, np.max(np.abs(point)))
        return ((Y_field(point + h * v) - Y_field(point - h * v)) / (2.0 * h),
                float(b_field(point + h * v) - b_field(point - h * v)) / (2.0 * h))

    if isinstance(direction, str):
        if direction != 'ds':
            raise SpecError(f"unknown cone direction {direction!r}")
        e_s = np.zeros(n + 1)
        e_s[n] = 1.0
        dY, db = along(e_s)
        return np.append(Y / s + dY, db)

    X = np.asarray(direction, dtype=float)
    if X.shape != (n,):
        raise SpecError(f"cone direction must have {n} components")
    base = cone.base_spec
    gamma = _christoffel_from(*metric_derivatives(base, x))
    dY, db = along(np.append(X, 0.0))
    tangent = dY + np.einsum('kij,i,j->k', gamma, X, Y) + (b / s) * X
    g = eval_metric(base, x)
    return np.append(tangent, db - s * float(X @ g @ Y))


def cone_covariant_generic(cone: ConeSpec, section, direction: Union[str, Sequence[float]],
                           point: Sequence[float]) -> np.ndarray:
    """Same derivative from the cone's own Christoffel symbols."""
    n = cone.base_spec.dim
    if isinstance(direction, str):
        V = np.zeros(n + 1)
        V[n] = 1.0
    else:
        V = np.append(np.asarray(direction, dtype=float), 0.0)
    Y_field, b_field = section
    Y_field = as_field(cone, Y_field)
    b_field = _scalar_field(cone, b_field)

    def joined(p):
        return np.append(Y_field(p), float(b_field(p)))

    return covariant_derivative_field(cone, V, TensorField(joined), point)


def cone_isomorphism(s: float, X: Sequence[float], b: float) -> Tuple[np.ndarray, float]:
    """X + b d_s at height s maps to (sX, b)."""
    return float(s) * np.asarray(X, dtype=float), float(b)


def verify_cone_isomorphism(spec: ManifoldSpec, cone_loop: CurvePath, s0: Optional[float] = None,
                            steps: Optional[int] = None, cone: Optional[ConeSpec] = None) -> Dict:
    """
    Compare Levi-Civita transport of the cone around (gamma, a) with rolling
    transport (c = 1) around gamma, after conjugating by the cone isomorphism.

    Returns:
        Report with the operator-norm residual
    """
    if not cone_loop.is_loop:
        raise SpecError("cone isomorphism check needs a closed loop")
    n = spec.dim
    if cone is None:
        cone = cone_spec(spec, _range_around(cone_loop, n))
    start = cone_loop.start
    if s0 is None:
        s0 = float(start[n])
    elif abs(start[n] - s0) > 1e-12:
        raise SpecError(f"loop starts at height {start[n]}, expected {s0}")
    _check_curve(cone, cone_loop)
    steps = check_steps(steps or cone_loop.steps_per_segment)

    P_cone = levi_civita_operator(cone, cone_loop, steps)
    iso = block_diag(s0 * np.eye(n), [[1.0]])
    conjugated = iso @ P_cone @ np.linalg.inv(iso)

    base_loop = _project_loop(cone_loop, n)
    rolling = rolling_transport(spec, 1, base_loop, steps)
    B0 = fiber_basis(spec, start[:n])
    difference = np.linalg.solve(B0, (conjugated - rolling.coordinate_matrix) @ B0)
    residual = float(np.linalg.norm(difference, 2))
    logger.debug("cone isomorphism residual %.3e at s0=%g", residual, s0)
    return {
        's0': float(s0),
        'steps': steps,
        'residual': residual,
        'rolling_defect': rolling.preservation_defect(),
    }


def _range_around(cone_loop: CurvePath, n: int) -> Tuple[float, float]:
    heights = cone_loop.sample(64)[:, n]
    lo, hi = float(np.min(heights)), float(np.max(heights))
    if lo <= 0.0:
        raise DomainError("cone loop reaches the apex")
    return min(DEFAULT_S_RANGE[0], 0.5 * lo), max(DEFAULT_S_RANGE[1], 2.0 * hi)


class _ProjectedSegment(Segment):
    """First n coordinates of a cone segment."""

    def __init__(self, inner, n: int):
        self.inner = inner
        self.n = n

    def position(self, t):
        return self.inner.position(t)[:self.n]

    def velocity(self, t):
        return self.inner.velocity(t)[:self.n]


def _project_loop(cone_loop: CurvePath, n: int) -> CurvePath:
    return CurvePath([_ProjectedSegment(segment, n) for segment in cone_loop.segments],
                     cone_loop.steps_per_segment, True)
