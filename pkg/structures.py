"""
Sasakian and 3-Sasakian structures read off a parallel complex structure of
the rolling connection, and the converse: the rolling-parallel tensor J^R
assembled from given structure data.

J^R acts on the fiber TM + R. In coordinates it splits as

    J^R (X, r) = (J X + r Z, -alpha(X))

so Z, alpha and J are the last column, the negated last row and the
tangent block of its matrix.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from connections import FiberMetric, fiber_basis, rolling_transport
from curves import CurvePath
from errors import StructureError, ToleranceError
from geometry import (ManifoldSpec, _frame_from_metric, christoffel, einstein_defect, eval_metric, riemann_tensor,
                      stereographic_embedding, stereographic_jacobian)
from holonomy import HolonomyAlgebra, commutant_skew, generate_loops, unit_complex_structure

logger = logging.getLogger(__name__)

STRUCTURE_TOLERANCE = 1e-6
VERIFY_STEP = 1e-4
VERIFY_TOLERANCE = 1e-4
NONDEGENERACY_BOUND = 0.1
HYPOTHESIS_TOLERANCE = 1e-5
SCALAR_ENTRY_TOLERANCE = 1e-6
TRANSPORT_STEPS = 64
NEIGHBOUR_STEPS = 16

# epsilon[i, j, k], sign of the permutation (i, j, k) of (0, 1, 2)
EPSILON = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPSILON[_i, _j, _k] = 1.0
    EPSILON[_j, _i, _k] = -1.0

# Left multiplication by the quaternion units i and j on R^4 = H
QUATERNION_I = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
QUATERNION_J = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)


def quaternionic_triple(dim: int) -> np.ndarray:
    """Standard triple on R^dim, dim a multiple of 4, with I_a I_b = -eps_abc I_c."""
    if dim % 4:
        raise StructureError(f"no quaternionic structure on R^{dim}")
    blocks = dim // 4
    I1 = np.kron(np.eye(blocks), QUATERNION_I)
    I2 = np.kron(np.eye(blocks), QUATERNION_J)
    return np.array([I1, I2, -I1 @ I2])


def epsilon_defect(triple: np.ndarray) -> float:
    """Largest violation of J_i J_j = -eps_ijk J_k (i != j) and J_i^2 = -I."""
    size = triple.shape[-1]
    worst = 0.0
    for i in range(3):
        worst = max(worst, np.max(np.abs(triple[i] @ triple[i] + np.eye(size))))
        for j in range(3):
            if i != j:
                target = -np.einsum('k,kab->ab', EPSILON[i, j], triple)
                worst = max(worst, np.max(np.abs(triple[i] @ triple[j] - target)))
    return float(worst)


def _sign_normalized(J: np.ndarray) -> Tuple[np.ndarray, int]:
    """Flip J so that Z = J(0, 1) has positive first nonzero frame component."""
    n = J.shape[0] - 1
    for value in np.concatenate([J[:n, n], -J[n, :n]]):
        if abs(value) > STRUCTURE_TOLERANCE:
            return (J, 1) if value > 0 else (-J, -1)
    return J, 1


def invariant_complex_structure(algebra: HolonomyAlgebra, seed: Optional[np.ndarray] = None,
                                commutant: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Holonomy-invariant complex structure J_0^R, or a quaternionic triple.

    Args:
        algebra: Estimated holonomy algebra
        seed: Optional (N, N) matrix or (3, N, N) triple in the fiber basis at the base;
            checked for invariance and used as is
        commutant: Precomputed commutant_skew basis

    Returns:
        (N, N) matrix when the commutant is one-dimensional, (3, N, N) triple when it is
        three-dimensional or a triple seed was given
    """
    if seed is not None:
        seed = np.asarray(seed, dtype=float)
        generators = seed if seed.ndim == 3 else seed[None]
        for J in generators:
            if np.max(np.abs(J @ J + np.eye(J.shape[0]))) > STRUCTURE_TOLERANCE:
                raise StructureError("seed is not a complex structure")
            for b in algebra.basis:
                if np.max(np.abs(J @ b - b @ J)) > 1e-6 * max(1.0, np.max(np.abs(b))):
                    raise StructureError("seed does not commute with the holonomy algebra")
        if seed.ndim == 3 and epsilon_defect(seed) > STRUCTURE_TOLERANCE:
            raise StructureError(f"seed triple violates the quaternion relations ({epsilon_defect(seed):.2e})")
        return seed

    if commutant is None:
        commutant = commutant_skew(algebra)
    dimension = len(commutant)
    if dimension == 0:
        raise StructureError("no invariant structure: the skew commutant is trivial")
    if dimension == 1:
        J, _ = _sign_normalized(unit_complex_structure(commutant[0]))
        defect = np.max(np.abs(J @ J + np.eye(J.shape[0])))
        if defect > STRUCTURE_TOLERANCE:
            raise StructureError(f"commutant generator is not a complex structure (|J^2 + I| = {defect:.2e})")
        return J
    if dimension == 3:
        J1 = unit_complex_structure(commutant[0])
        # anticommuting part of the remaining generators: A -> (A + J1 A J1) / 2
        parts = [0.5 * (A + J1 @ A @ J1) for A in commutant[1:]]
        best = max(parts, key=np.linalg.norm)
        if np.linalg.norm(best) < STRUCTURE_TOLERANCE:
            raise StructureError("commutant has no element anticommuting with the first generator")
        J2 = unit_complex_structure(best)
        triple = np.array([J1, J2, -J1 @ J2])
        defect = epsilon_defect(triple)
        if defect > STRUCTURE_TOLERANCE:
            raise StructureError(f"quaternion relations unachievable (defect {defect:.2e})")
        return triple
    raise StructureError(f"skew commutant has dimension {dimension}; supply a seed structure")


# parallel extension

class ParallelField:
    """
    Parallel extension of fiber endomorphisms given at the base point.

    Values at x come from transport along the straight segment base -> x;
    points near an already reached anchor are reached by a short extra
    segment from that anchor. Transports are cached per point.
    """

    def __init__(self, spec: ManifoldSpec, c: int, seeds: np.ndarray, base: Sequence[float],
                 steps: int = TRANSPORT_STEPS, neighbour_steps: int = NEIGHBOUR_STEPS):
        self.spec = spec
        self.c = FiberMetric(c).c
        self.base = spec.require_inside(base)
        seeds = np.asarray(seeds, dtype=float)
        self.seeds = seeds if seeds.ndim == 3 else seeds[None]
        B0 = fiber_basis(spec, self.base)
        self.coordinate_seeds = np.einsum('ab,kbc,cd->kad', B0, self.seeds, np.linalg.inv(B0))
        self.steps = steps
        self.neighbour_steps = neighbour_steps
        self._transports: Dict[Tuple[float, ...], np.ndarray] = {}

    def _segment(self, start: np.ndarray, end: np.ndarray, steps: int) -> np.ndarray:
        if np.array_equal(start, end):
            return np.eye(self.spec.dim + 1)
        curve = CurvePath.polyline([start, end], steps)
        return rolling_transport(self.spec, self.c, curve).coordinate_matrix

    def transport(self, x: Sequence[float], anchor: Optional[Sequence[float]] = None) -> np.ndarray:
        """Coordinate transport from the base fiber to the fiber at x."""
        x = np.asarray(x, dtype=float)
        key = tuple(x)
        if key in self._transports:
            return self._transports[key]
        if anchor is None:
            Y = self._segment(self.base, x, self.steps)
        else:
            anchor = np.asarray(anchor, dtype=float)
            Y = self._segment(anchor, x, self.neighbour_steps) @ self.transport(anchor)
        self._transports[key] = Y
        return Y

    def coordinate_values(self, x: Sequence[float], anchor: Optional[Sequence[float]] = None) -> np.ndarray:
        Y = self.transport(x, anchor)
        return np.einsum('ab,kbc,cd->kad', Y, self.coordinate_seeds, np.linalg.inv(Y))

    def two_leg_values(self, x: Sequence[float]) -> np.ndarray:
        """Values at x along base -> corner -> x, corner off the straight segment."""
        x = np.asarray(x, dtype=float)
        offset = x - self.base
        length = np.linalg.norm(offset)
        if length == 0.0:
            return self.coordinate_seeds.copy()
        k = int(np.argmin(np.abs(offset)))
        corner = self.base + 0.5 * offset
        corner[k] += 0.25 * length
        if not self.spec.contains(corner):
            corner[k] -= 0.5 * length
        Y = self._segment(corner, x, self.steps) @ self._segment(self.base, corner, self.steps)
        return np.einsum('ab,kbc,cd->kad', Y, self.coordinate_seeds, np.linalg.inv(Y))


@dataclass
class JRSamples:
    """
    Samples of one or three bundle tensors J^R.

    coordinate and frame have shape (points, structures, n+1, n+1); source(x, anchor)
    evaluates the coordinate values anywhere, for finite differences.
    """
    spec: ManifoldSpec
    c: int
    points: np.ndarray
    coordinate: np.ndarray
    frame: np.ndarray
    source: Callable = field(repr=False)
    path_residual: float = 0.0
    loop_residual: Optional[float] = None

    @property
    def count(self) -> int:
        return self.coordinate.shape[1]


def _frame_values(spec: ManifoldSpec, x: np.ndarray, values: np.ndarray) -> np.ndarray:
    B = fiber_basis(spec, x)
    return np.einsum('ab,kbc,cd->kad', np.linalg.inv(B), values, B)


def extend_parallel(spec: ManifoldSpec, c: int, J0: np.ndarray, base: Sequence[float],
                    targets: Sequence[Sequence[float]], steps: int = TRANSPORT_STEPS,
                    check_paths: bool = True) -> JRSamples:
    """
    Extend J_0^R to the targets by parallel transport, J^R_x = P J_0^R P^-1.

    Args:
        spec: Manifold
        c: Curvature parameter
        J0: (N, N) or (3, N, N) in the fiber basis at base
        base: Base point
        targets: Points to reach by straight segments from base
        steps: Transport steps per segment
        check_paths: Compare every target with a two-leg path and record the largest difference

    Returns:
        JRSamples
    """
    extension = ParallelField(spec, c, J0, base, steps)
    points = np.array([spec.require_inside(x) for x in targets], dtype=float).reshape(-1, spec.dim)
    coordinate = np.array([extension.coordinate_values(x) for x in points])
    frame = np.array([_frame_values(spec, x, values) for x, values in zip(points, coordinate)])
    residual = 0.0
    if check_paths:
        for x, values in zip(points, coordinate):
            residual = max(residual, float(np.max(np.abs(extension.two_leg_values(x) - values))))
    logger.debug("extended %d structure(s) to %d points, path residual %.2e",
                 extension.seeds.shape[0], len(points), residual)
    return JRSamples(spec, extension.c, points, coordinate, frame, extension.coordinate_values, residual)


# Sasakian structures

def split_structure(JR: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Coordinate J^R -> (Z, alpha, J, scalar entry)."""
    n = JR.shape[0] - 1
    return JR[:n, n].copy(), -JR[n, :n], JR[:n, :n].copy(), float(JR[n, n])


def assemble_structure(g: np.ndarray, Z: np.ndarray, J: np.ndarray) -> np.ndarray:
    """J^R(X, r) = (J X + r Z, -g(X, Z)) as a coordinate matrix."""
    n = len(Z)
    JR = np.zeros((n + 1, n + 1))
    JR[:n, :n] = J
    JR[:n, n] = Z
    JR[n, :n] = -(g @ Z)
    return JR


def algebraic_residuals(g: np.ndarray, Z: np.ndarray, alpha: np.ndarray, J: np.ndarray) -> Dict[str, float]:
    """Pointwise identities of an almost contact metric structure, measured in an orthonormal frame."""
    n = len(Z)
    E = _frame_from_metric(g)
    E_inv = np.linalg.inv(E)
    return {
        'alpha_of_Z': float(abs(alpha @ Z - 1.0)),
        'J_of_Z': float(np.max(np.abs(E_inv @ J @ Z))),
        'J_squared': float(np.max(np.abs(E_inv @ (J @ J + np.eye(n) - np.outer(Z, alpha)) @ E))),
        'compatibility': float(np.max(np.abs(E.T @ (J.T @ g @ J - g + np.outer(alpha, alpha)) @ E))),
        'unit_Z': float(abs(np.sqrt(Z @ g @ Z) - 1.0)),
        'alpha_is_dual_of_Z': float(np.max(np.abs(E.T @ (alpha - g @ Z)))),
    }


@dataclass
class SasakiStructure:
    """
    Sampled (Z, alpha, J) with omega(X, Y) = g(JX, Y).

    source(x, anchor) returns the coordinate (Z, alpha, J) at any point near
    the samples; it backs the finite differences of verify_sasaki.
    """
    spec: ManifoldSpec
    points: np.ndarray
    Z: np.ndarray
    alpha: np.ndarray
    J: np.ndarray
    JR: np.ndarray
    omega: np.ndarray
    source: Callable = field(repr=False)
    sign: int = 1
    algebraic: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_fields(cls, spec: ManifoldSpec, Z_field: Callable, J_field: Callable,
                    points: Sequence[Sequence[float]]) -> 'SasakiStructure':
        """Structure from closed-form fields; alpha is taken as g(Z, .)."""

        def source(x, anchor=None):
            x = np.asarray(x, dtype=float)
            Z = np.asarray(Z_field(x), dtype=float)
            return Z, eval_metric(spec, x) @ Z, np.asarray(J_field(x), dtype=float)

        points = np.asarray(points, dtype=float).reshape(-1, spec.dim)
        values = [source(x) for x in points]
        Z = np.array([v[0] for v in values])
        alpha = np.array([v[1] for v in values])
        J = np.array([v[2] for v in values])
        metrics = [eval_metric(spec, x) for x in points]
        JR = np.array([assemble_structure(g, z, j) for g, z, j in zip(metrics, Z, J)])
        omega = np.array([j.T @ g for g, j in zip(metrics, J)])
        algebraic = _worst([algebraic_residuals(g, z, a, j) for g, z, a, j in zip(metrics, Z, alpha, J)])
        return cls(spec, points, Z, alpha, J, JR, omega, source, 1, algebraic)

    def to_dict(self) -> Dict:
        return {
            'points': self.points.tolist(),
            'Z': self.Z.tolist(),
            'alpha': self.alpha.tolist(),
            'J': self.J.tolist(),
            'sign': self.sign,
            'algebraic': dict(self.algebraic),
        }


def _worst(reports: List[Dict[str, float]]) -> Dict[str, float]:
    worst: Dict[str, float] = {}
    for report in reports:
        for key, value in report.items():
            worst[key] = max(worst.get(key, 0.0), value)
    return worst


def extract_sasaki(spec: ManifoldSpec, samples: JRSamples, index: int = 0) -> SasakiStructure:
    """
    Split sampled J^R into the Sasakian data (Z, alpha, J).

    Args:
        spec: Manifold
        samples: Output of extend_parallel or build_JR_from_structure
        index: Which structure of a triple to read

    Returns:
        SasakiStructure with the pointwise identities measured
    """
    values = samples.coordinate[:, index]
    Z, alpha, J, reports = [], [], [], []
    for x, JR in zip(samples.points, values):
        z, a, j, scalar = split_structure(JR)
        if abs(scalar) > SCALAR_ENTRY_TOLERANCE:
            raise StructureError(f"J^R(0, 1) has scalar component {scalar:.2e} at {x.tolist()}")
        reports.append(algebraic_residuals(eval_metric(spec, x), z, a, j))
        Z.append(z)
        alpha.append(a)
        J.append(j)
    Z, alpha, J = np.array(Z), np.array(alpha), np.array(J)
    omega = np.array([j.T @ eval_metric(spec, x) for x, j in zip(samples.points, J)])

    def source(x, anchor=None):
        z, a, j, _ = split_structure(samples.source(x, anchor)[index])
        return z, a, j

    _, sign = _sign_normalized(samples.frame[0, index])
    return SasakiStructure(spec, samples.points.copy(), Z, alpha, J, values.copy(), omega, source, sign,
                           _worst(reports))


def _derivatives(source: Callable, x: np.ndarray, h: float):
    """Central differences of (Z, alpha, J) along the coordinate axes."""
    n = len(x)
    dZ = np.zeros((n, n))
    dalpha = np.zeros((n, n))
    dJ = np.zeros((n, n, n))
    for a in range(n):
        step = np.zeros(n)
        step[a] = h
        Zp, ap, Jp = source(x + step, x)
        Zm, am, Jm = source(x - step, x)
        dZ[:, a] = (Zp - Zm) / (2.0 * h)
        dalpha[a] = (ap - am) / (2.0 * h)
        dJ[a] = (Jp - Jm) / (2.0 * h)
    return dZ, dalpha, dJ


def _antisymmetric_target(T: np.ndarray, z: np.ndarray) -> np.ndarray:
    """T[p, q] - (z_q e_p - z_p e_q) for frame vectors."""
    n = len(z)
    result = T.copy()
    for p in range(n):
        for q in range(n):
            result[p, q, p] -= z[q]
            result[p, q, q] += z[p]
    return result


def _point_residuals(spec: ManifoldSpec, source: Callable, x: np.ndarray, h: float) -> Dict[str, float]:
    Z, alpha, J = source(x)
    g = eval_metric(spec, x)
    gamma = christoffel(spec, x)
    E = _frame_from_metric(g)
    E_inv = np.linalg.inv(E)
    dZ, dalpha, dJ = _derivatives(source, x, h)

    nabla_Z = dZ + np.einsum('kaj,j->ka', gamma, Z)
    nabla_J = np.array([dJ[a] + gamma[:, a, :] @ J - J @ gamma[:, a, :] for a in range(len(x))])
    z = E.T @ g @ Z

    along_frame = np.einsum('akl,ap->pkl', nabla_J, E)
    parallel_J = _antisymmetric_target(np.einsum('rk,pkl,lq->pqr', E_inv, along_frame, E), z)
    killing = E.T @ g @ nabla_Z @ E
    d_alpha = dalpha - dalpha.T
    omega = J.T @ g
    omega_frame = E.T @ omega @ E
    length = np.linalg.norm(z)
    complement = null_space(z[None, :] / length) if length > 0.0 else np.eye(len(z))
    restricted = complement.T @ omega_frame @ complement
    _, Rm = riemann_tensor(spec, x)
    curvature = _antisymmetric_target(np.einsum('rk,klij,ip,jq,l->pqr', E_inv, Rm, E, E, Z), z)

    return {
        'J_minus_nabla_Z': float(np.max(np.abs(E_inv @ (J - nabla_Z) @ E))),
        'nabla_J': float(np.max(np.abs(parallel_J))),
        'killing': float(np.max(np.abs(killing + killing.T))),
        'd_alpha_minus_2_omega': float(np.max(np.abs(E.T @ (d_alpha - 2.0 * omega) @ E))),
        'omega_skew': float(np.max(np.abs(omega_frame + omega_frame.T))),
        'd_alpha_of_Z': float(np.max(np.abs(Z @ d_alpha @ E))),
        'omega_min_singular_value': float(np.min(np.linalg.svd(restricted, compute_uv=False)))
        if restricted.size else 0.0,
        'curvature_identity': float(np.max(np.abs(curvature))),
    }


def verify_sasaki(spec: ManifoldSpec, structure: SasakiStructure, step: float = VERIFY_STEP,
                  tolerance: float = VERIFY_TOLERANCE, check_convergence: bool = True) -> Dict:
    """
    Residuals of the Sasakian identities at every sample point.

    Measured over an orthonormal frame: JX - nabla_X Z, (nabla_X J)Y - g(Z,Y)X + g(X,Z)Y,
    the Killing equation, d alpha - 2 omega, skewness of omega, d alpha(Z, .),
    non-degeneracy of omega on ker alpha and R(X,Y)Z - g(Y,Z)X + g(X,Z)Y.

    Returns:
        Report with the worst residuals, the algebraic identities, the Einstein
        defect of Ric against (n-1) g, and a passed flag

    Raises:
        ToleranceError: when halving the difference step changes d alpha - 2 omega
            by more than the residual itself, i.e. the samples are too coarse
    """
    reports = []
    convergence = 0.0
    for x in structure.points:
        report = _point_residuals(spec, structure.source, x, step)
        if check_convergence:
            refined = _point_residuals(spec, structure.source, x, 0.5 * step)
            change = abs(report['d_alpha_minus_2_omega'] - refined['d_alpha_minus_2_omega'])
            if change > max(tolerance, 0.5 * refined['d_alpha_minus_2_omega']):
                raise ToleranceError(f"lattice too coarse at {x.tolist()}: d alpha - 2 omega changes by "
                                     f"{change:.2e} when the step is halved")
            convergence = max(convergence, change)
        reports.append(report)

    residuals = _worst([{k: v for k, v in r.items() if k != 'omega_min_singular_value'} for r in reports])
    smallest = min(r['omega_min_singular_value'] for r in reports) if reports else 0.0
    einstein = max(einstein_defect(spec, x, spec.dim - 1) for x in structure.points)
    algebraic_ok = all(value < STRUCTURE_TOLERANCE for value in structure.algebraic.values())
    passed = (all(value < tolerance for value in residuals.values())
              and smallest > NONDEGENERACY_BOUND and algebraic_ok)
    return {
        'points': len(structure.points),
        'step': step,
        'tolerance': tolerance,
        'residuals': residuals,
        'omega_min_singular_value': smallest,
        'algebraic': dict(structure.algebraic),
        'einstein_defect': einstein,
        'step_halving_change': convergence,
        'sign': structure.sign,
        'passed': bool(passed),
    }


def _killing_defect(spec: ManifoldSpec, Z_field: Callable, x: np.ndarray, h: float = VERIFY_STEP) -> float:
    g = eval_metric(spec, x)
    E = _frame_from_metric(g)
    n = len(x)
    dZ = np.zeros((n, n))
    for a in range(n):
        step = np.zeros(n)
        step[a] = h
        dZ[:, a] = (np.asarray(Z_field(x + step)) - np.asarray(Z_field(x - step))) / (2.0 * h)
    nabla_Z = dZ + np.einsum('kaj,j->ka', christoffel(spec, x), Z_field(x))
    K = E.T @ g @ nabla_Z @ E
    return float(np.max(np.abs(K + K.T)))


def _check_hypotheses(spec: ManifoldSpec, Z_field: Callable, J_field: Callable, points: np.ndarray,
                      label: str = "") -> None:
    for x in points:
        g = eval_metric(spec, x)
        Z = np.asarray(Z_field(x), dtype=float)
        J = np.asarray(J_field(x), dtype=float)
        report = algebraic_residuals(g, Z, g @ Z, J)
        for key in ('unit_Z', 'J_of_Z', 'J_squared', 'compatibility'):
            if report[key] > HYPOTHESIS_TOLERANCE:
                raise StructureError(f"{label}hypothesis {key} fails at {x.tolist()} ({report[key]:.2e})")
        killing = _killing_defect(spec, Z_field, x)
        if killing > HYPOTHESIS_TOLERANCE:
            raise StructureError(f"{label}Z is not a Killing field at {x.tolist()} ({killing:.2e})")


def _default_points(spec: ManifoldSpec, count: int = 8, radius: float = 0.3, seed: int = 0) -> np.ndarray:
    return np.vstack([spec.base_point[None], spec.random_points(count - 1, seed, radius)])


def _loop_commutators(spec: ManifoldSpec, c: int, fields: Sequence[Tuple[Callable, Callable]],
                      loops: Sequence[CurvePath]) -> float:
    worst = 0.0
    for loop in loops:
        x0 = loop.start
        g = eval_metric(spec, x0)
        P = rolling_transport(spec, c, loop).coordinate_matrix
        for Z_field, J_field in fields:
            JR = assemble_structure(g, np.asarray(Z_field(x0)), np.asarray(J_field(x0)))
            B = fiber_basis(spec, x0)
            worst = max(worst, float(np.max(np.abs(np.linalg.solve(B, (P @ JR - JR @ P) @ B)))))
    return worst


def _structure_source(spec: ManifoldSpec, fields: Sequence[Tuple[Callable, Callable]]) -> Callable:
    def source(x, anchor=None):
        x = np.asarray(x, dtype=float)
        g = eval_metric(spec, x)
        return np.array([assemble_structure(g, np.asarray(Z(x)), np.asarray(J(x))) for Z, J in fields])
    return source


def build_JR_from_structure(spec: ManifoldSpec, Z_field: Callable, J_field: Callable,
                            points: Optional[Sequence[Sequence[float]]] = None,
                            loops: Optional[Sequence[CurvePath]] = None, loop_count: int = 50,
                            seed: int = 0, steps: int = 128) -> JRSamples:
    """
    Assemble J^R(X, r) = (JX + rZ, -g(X, Z)) from a unit Killing Z and a compatible J,
    and test its parallelism: [P_loop, J^R] must vanish for every loop.

    Args:
        spec: Manifold
        Z_field: x -> Z(x) in coordinates
        J_field: x -> J(x) as an n x n coordinate matrix
        points: Sample points; default the base point and seven points around it
        loops: Loops based at the base point; default the rectangles plus loop_count smooth loops

    Returns:
        JRSamples with loop_residual set

    Raises:
        StructureError: when Z is not a unit Killing field or J is not compatible
    """
    points = _default_points(spec) if points is None else np.asarray(points, dtype=float).reshape(-1, spec.dim)
    _check_hypotheses(spec, Z_field, J_field, points)
    source = _structure_source(spec, [(Z_field, J_field)])
    coordinate = np.array([source(x) for x in points])
    frame = np.array([_frame_values(spec, x, values) for x, values in zip(points, coordinate)])
    if loops is None:
        loops = generate_loops(spec, points[0], loop_count, seed, steps)
    residual = _loop_commutators(spec, 1, [(Z_field, J_field)], loops)
    logger.info("J^R loop commutator residual %.2e over %d loops", residual, len(loops))
    return JRSamples(spec, 1, points, coordinate, frame, source, 0.0, residual)


def jr_isometry_defect(samples: JRSamples) -> float:
    """Largest |h(J^R u, J^R v) - h(u, v)| in the fiber bases."""
    eta = FiberMetric(samples.c).gram(samples.spec.dim)
    values = samples.frame.reshape(-1, *samples.frame.shape[-2:])
    return float(max(np.max(np.abs(M.T @ eta @ M - eta)) for M in values))


# 3-Sasakian structures

@dataclass
class ThreeSasakiStructure:
    structures: List[SasakiStructure]
    residuals: Dict[str, float]

    def to_dict(self) -> Dict:
        return {
            'structures': [s.to_dict() for s in self.structures],
            'residuals': dict(self.residuals),
        }


def _cross_residuals(spec: ManifoldSpec, sources: Sequence[Callable], points: np.ndarray,
                     h: float = VERIFY_STEP) -> Dict[str, float]:
    worst = {'Z_orthonormal': 0.0, 'brackets': 0.0, 'J_i_Z_j': 0.0}
    for x in points:
        g = eval_metric(spec, x)
        E_inv = np.linalg.inv(_frame_from_metric(g))
        data = [source(x) for source in sources]
        Z = np.array([d[0] for d in data])
        J = np.array([d[2] for d in data])
        gram = Z @ g @ Z.T
        worst['Z_orthonormal'] = max(worst['Z_orthonormal'], float(np.max(np.abs(gram - np.eye(3)))))
        dZ = [_derivatives(source, x, h)[0] for source in sources]
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                target = np.einsum('k,ka->a', EPSILON[i, j], Z)
                bracket = dZ[j] @ Z[i] - dZ[i] @ Z[j]
                worst['brackets'] = max(worst['brackets'], float(np.max(np.abs(E_inv @ (bracket - 2.0 * target)))))
                worst['J_i_Z_j'] = max(worst['J_i_Z_j'], float(np.max(np.abs(E_inv @ (J[i] @ Z[j] + target)))))
    return worst


def extract_3sasaki(spec: ManifoldSpec, samples: JRSamples) -> ThreeSasakiStructure:
    """
    Three Sasakian structures from a parallel quaternionic triple, with the
    cross relations g(Z_i, Z_j) = delta_ij, [Z_i, Z_j] = 2 eps_ijk Z_k and
    J_i Z_j = -eps_ijk Z_k.
    """
    if samples.count != 3:
        raise StructureError(f"expected a triple of J^R samples, got {samples.count}")
    structures = [extract_sasaki(spec, samples, index) for index in range(3)]
    residuals = _cross_residuals(spec, [s.source for s in structures], samples.points)
    residuals['epsilon_relations'] = max(epsilon_defect(values) for values in samples.frame)
    residuals['path_residual'] = samples.path_residual
    return ThreeSasakiStructure(structures, residuals)


def build_JR_triple(spec: ManifoldSpec, fields: Sequence[Tuple[Callable, Callable]],
                    points: Optional[Sequence[Sequence[float]]] = None,
                    tolerance: float = HYPOTHESIS_TOLERANCE) -> Tuple[JRSamples, Dict[str, float]]:
    """
    Assemble J_i^R from three (Z_i, J_i) and check J_i^R J_j^R = -eps_ijk J_k^R
    separately on the cone vector (0, 1), on sections of D and on span{Z_1, Z_2, Z_3}.

    Returns:
        (JRSamples, residual report)

    Raises:
        StructureError: when a hypothesis fails
        ToleranceError: when an epsilon relation fails by more than the tolerance
    """
    if len(fields) != 3:
        raise StructureError("a 3-Sasakian structure needs exactly three (Z, J) pairs")
    points = _default_points(spec) if points is None else np.asarray(points, dtype=float).reshape(-1, spec.dim)
    for index, (Z_field, J_field) in enumerate(fields):
        _check_hypotheses(spec, Z_field, J_field, points, f"structure {index + 1}: ")

    def structure_source(index):
        return lambda x, anchor=None: (np.asarray(fields[index][0](x), dtype=float),
                                       eval_metric(spec, x) @ np.asarray(fields[index][0](x), dtype=float),
                                       np.asarray(fields[index][1](x), dtype=float))

    report = _cross_residuals(spec, [structure_source(i) for i in range(3)], points)
    if report['brackets'] > tolerance or report['Z_orthonormal'] > tolerance:
        raise StructureError(f"Z fields do not satisfy the su(2) relations ({report})")

    source = _structure_source(spec, fields)
    coordinate = np.array([source(x) for x in points])
    frame = np.array([_frame_values(spec, x, values) for x, values in zip(points, coordinate)])
    n = spec.dim
    cases = {'cone_vector': 0.0, 'contact_distribution': 0.0, 'reeb_span': 0.0, 'squares': 0.0,
             'J_i_Z_j_symmetric': 0.0}
    for x, triple in zip(points, coordinate):
        g = eval_metric(spec, x)
        B = fiber_basis(spec, x)
        B_inv = np.linalg.inv(B)
        Z = triple[:, :n, n]
        # D = orthogonal complement of the Z_i
        D = null_space(Z @ g) if n > 3 else np.zeros((n, 0))
        cone = np.zeros(n + 1)
        cone[n] = 1.0
        for i in range(3):
            cases['squares'] = max(cases['squares'],
                                   float(np.max(np.abs(B_inv @ (triple[i] @ triple[i] + np.eye(n + 1)) @ B))))
            for j in range(3):
                if i == j:
                    continue
                difference = triple[i] @ triple[j] + np.einsum('k,kab->ab', EPSILON[i, j], triple)
                cases['cone_vector'] = max(cases['cone_vector'], float(np.max(np.abs(B_inv @ difference @ cone))))
                if D.shape[1]:
                    lifted = np.vstack([D, np.zeros((1, D.shape[1]))])
                    cases['contact_distribution'] = max(cases['contact_distribution'],
                                                        float(np.max(np.abs(B_inv @ difference @ lifted))))
                lifted = np.vstack([Z.T, np.zeros((1, 3))])
                cases['reeb_span'] = max(cases['reeb_span'], float(np.max(np.abs(B_inv @ difference @ lifted))))
                symmetric = triple[i][:n, :n] @ Z[j] + triple[j][:n, :n] @ Z[i]
                cases['J_i_Z_j_symmetric'] = max(cases['J_i_Z_j_symmetric'],
                                                 float(np.max(np.abs(B_inv[:n, :n] @ symmetric))))
    report.update(cases)
    failing = {key: value for key, value in cases.items() if value > tolerance}
    if failing:
        raise ToleranceError(f"epsilon relations fail: {failing}")
    samples = JRSamples(spec, 1, points, coordinate, frame, source)
    return samples, report


# closed-form structures used as references

def heisenberg_structure(m: int = 1) -> Tuple[Callable, Callable]:
    """
    Reeb field Z = d/dz and J with J X_i = -Y_i, J Y_i = X_i, J Z = 0 on the
    Heisenberg group, in coordinates (x_1, y_1, ..., x_m, y_m, z).
    """
    n = 2 * m + 1

    def Z_field(x):
        Z = np.zeros(n)
        Z[-1] = 1.0
        return Z

    def J_field(x):
        frame = np.zeros((n, n))
        image = np.zeros((n, n))
        for i in range(m):
            xi, yi = x[2 * i], x[2 * i + 1]
            X = np.zeros(n)
            X[2 * i], X[-1] = 1.0, -yi
            Y = np.zeros(n)
            Y[2 * i + 1], Y[-1] = 1.0, xi
            frame[:, 2 * i], frame[:, 2 * i + 1] = X, Y
            image[:, 2 * i], image[:, 2 * i + 1] = -Y, X
        frame[-1, -1] = 1.0
        return image @ np.linalg.inv(frame)

    return Z_field, J_field


def sphere_fiber_identification(n: int) -> np.ndarray:
    """
    Fiber basis at the chart origin of the unit sphere -> R^{n+1}:
    frame vectors go to e_a, the scalar slot to the point itself, -e_{n+1}.
    """
    D = np.eye(n + 1)
    D[n, n] = -1.0
    return D


def sphere_seed_triple(n: int) -> np.ndarray:
    """Standard quaternionic triple of R^{n+1} in the fiber basis at the chart origin."""
    D = sphere_fiber_identification(n)
    return np.array([D @ I @ D for I in quaternionic_triple(n + 1)])


def hopf_structures(n: int) -> List[Tuple[Callable, Callable]]:
    """
    The three Sasakian structures of the unit sphere S^n, n = 4k+3, induced
    by the standard quaternionic triple, in the stereographic chart.
    """
    triple = quaternionic_triple(n + 1)
    fields = []
    for I in triple:
        def Z_field(u, I=I):
            jacobian = stereographic_jacobian(u)
            return np.linalg.lstsq(jacobian, I @ stereographic_embedding(u), rcond=None)[0]

        def J_field(u, I=I):
            jacobian = stereographic_jacobian(u)
            return np.linalg.lstsq(jacobian, I @ jacobian, rcond=None)[0]

        fields.append((Z_field, J_field))
    return fields
