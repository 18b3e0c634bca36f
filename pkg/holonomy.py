"""
Rolling holonomy: loop families, estimation of the holonomy Lie algebra at a
base point, its skew commutant, and classification against the possible
holonomy groups of a manifold rolling on the unit sphere.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag, logm, null_space
from scipy.stats import special_ortho_group

from connections import FiberMetric, curvature_forms, fiber_basis, rolling_transport
from curves import CurvePath
from errors import ClassificationError, DomainError, SpecError
from geometry import DIFF_STEP, ManifoldSpec

logger = logging.getLogger(__name__)

RECTANGLE_SIDES = (0.05, 0.1, 0.2)
HARMONICS = 3
MAX_EXCURSION = 0.3
RANK_FLOOR = 1e-6
CLOSURE_TOLERANCE = 1e-5
SKEW_TOLERANCE = 1e-7
TRACE_TOLERANCE = 1e-5
COMMUTANT_RCOND = 1e-6
GAP_WARNING = 1e3


@dataclass
class HolonomySample:
    loop_id: int
    base: np.ndarray
    matrix: np.ndarray
    log_matrix: np.ndarray


@dataclass
class HolonomyAlgebra:
    """
    Estimated holonomy Lie algebra in the fiber basis at the base point.

    basis has shape (rank, n+1, n+1) and is Frobenius-orthonormal.
    """
    base: np.ndarray
    basis: np.ndarray
    rank: int
    singular_values: List[float]
    rank_tolerance: float
    c: int = 1
    svd_rank: Optional[int] = None
    closure_added: int = 0
    closure_residual: float = 0.0
    half_loop_rank: Optional[int] = None
    samples: List[HolonomySample] = field(default_factory=list, repr=False)
    sample_count: int = 0
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.svd_rank is None:
            self.svd_rank = self.rank

    @property
    def size(self) -> int:
        return self.basis.shape[1]

    def singular_gap(self) -> Optional[float]:
        """Ratio between the last retained and the first discarded singular value of the sample span."""
        values = self.singular_values
        rank = self.svd_rank
        if rank == 0 or rank >= len(values):
            return None
        following = values[rank]
        return float('inf') if following == 0.0 else float(values[rank - 1] / following)

    def sample_metric_defect(self) -> float:
        """Largest departure of a loop transport from preserving the fiber metric."""
        if not self.samples:
            return 0.0
        eta = FiberMetric(self.c).gram(self.size - 1)
        return float(max(np.max(np.abs(s.matrix.T @ eta @ s.matrix - eta)) for s in self.samples))

    def contains(self, matrix: np.ndarray) -> float:
        """Distance of a matrix from the span, relative to its norm."""
        norm = np.linalg.norm(matrix)
        if norm == 0.0:
            return 0.0
        if self.rank == 0:
            return 1.0
        coefficients = np.einsum('kab,ab->k', self.basis, matrix)
        return float(np.linalg.norm(matrix - np.einsum('k,kab->ab', coefficients, self.basis)) / norm)


@dataclass
class GroupVerdict:
    label: str
    family: str
    controllable: bool
    algebra_dim: int
    commutant_skew_dim: int
    n: int
    orbit_dim: Optional[int] = None
    trace_defect: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'label': self.label,
            'family': self.family,
            'controllable': self.controllable,
            'algebra_dim': self.algebra_dim,
            'commutant_skew_dim': self.commutant_skew_dim,
            'n': self.n,
            'orbit_dim': self.orbit_dim,
            'trace_defect': self.trace_defect,
            'notes': list(self.notes),
        }


# loops

def _distance_to_boundary(spec: ManifoldSpec, base: np.ndarray) -> float:
    lo, hi = spec.chart_domain[:, 0], spec.chart_domain[:, 1]
    return float(np.min(np.minimum(base - lo, hi - base)))


def generate_loops(spec: ManifoldSpec, base: Optional[Sequence[float]] = None, count: int = 0, seed: int = 0,
                   steps: int = 512, sides: Sequence[float] = RECTANGLE_SIDES,
                   harmonics: int = HARMONICS) -> List[CurvePath]:
    """
    Deterministic loop family based at a point.

    Args:
        spec: Manifold
        base: Base point, default the spec's own
        count: Number of pseudo-random trigonometric loops added after the rectangles
        seed: Generator seed for the trigonometric loops
        steps: Steps per segment of every loop
        sides: Coordinate-square sides; squares are built in every coordinate plane

    Returns:
        Rectangles ordered by side then plane, followed by `count` smooth loops
    """
    base = spec.require_inside(spec.base_point if base is None else base)
    n = spec.dim
    room = _distance_to_boundary(spec, base)
    loops = []
    for delta in sides:
        if delta + 2.0 * DIFF_STEP * max(1.0, np.max(np.abs(base)) + delta) >= room:
            raise DomainError(f"chart domain around {base.tolist()} is too small for loops of side {delta}")
        for i in range(n):
            for j in range(i + 1, n):
                loops.append(CurvePath.rectangle(base, i, j, delta, steps))
    if count <= 0:
        return loops

    radius = min(MAX_EXCURSION, 0.45 * room)
    rng = np.random.default_rng(seed)
    ts = np.linspace(0.0, 1.0, 257)
    frequencies = 2.0 * np.pi * np.arange(1, harmonics + 1)
    decay = 1.0 / np.arange(1, harmonics + 1)[:, None]
    for _ in range(count):
        cos_coeffs = rng.standard_normal((harmonics, n)) * decay
        sin_coeffs = rng.standard_normal((harmonics, n)) * decay
        offsets = (np.cos(np.outer(ts, frequencies)) - 1.0) @ cos_coeffs + np.sin(np.outer(ts, frequencies)) @ sin_coeffs
        excursion = np.max(np.abs(offsets))
        scale = radius / excursion if excursion > 0.0 else 0.0
        loops.append(CurvePath.trig_loop(base, scale * cos_coeffs, scale * sin_coeffs, steps))
    return loops


def random_rotation(n: int, seed: int = 0) -> np.ndarray:
    if n < 2:
        return np.eye(n)
    return special_ortho_group.rvs(n, random_state=seed)


# estimation

def skew_part(matrix: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Projection onto the h-skew matrices: M -> (M - eta M^T eta) / 2."""
    return 0.5 * (matrix - eta @ matrix.T @ eta)


def _loop_evidence(spec: ManifoldSpec, c: int, loop_id: int, loop: CurvePath, conjugator: np.ndarray,
                   records_per_segment: int, use_logs: bool, use_curvature: bool):
    eta = FiberMetric(c).gram(spec.dim)
    record_every = max(1, loop.steps_per_segment // records_per_segment) if use_curvature else 0
    result = rolling_transport(spec, c, loop, record_every=record_every)
    operator, records = result if use_curvature else (result, [])
    conjugator_inv = np.linalg.inv(conjugator)
    matrices, notes, samples = [], [], []

    for point, Y in records:
        forms = curvature_forms(spec, c, point)
        Y_inv = np.linalg.inv(Y)
        for i in range(spec.dim):
            for j in range(i + 1, spec.dim):
                matrices.append(conjugator_inv @ Y_inv @ forms[i, j] @ Y @ conjugator)

    if use_logs:
        matrix = np.linalg.solve(conjugator, operator.coordinate_matrix @ conjugator)
        eigenvalues = np.linalg.eigvals(matrix)
        if np.min(np.abs(eigenvalues + 1.0)) < 1e-6:
            notes.append(f"loop {loop_id}: transport has an eigenvalue near -1, logarithm skipped")
        else:
            log_matrix = logm(matrix)
            if np.max(np.abs(np.imag(log_matrix))) > 1e-9:
                notes.append(f"loop {loop_id}: logarithm is not real, sample discarded")
            else:
                log_matrix = np.real(log_matrix)
                defect = np.max(np.abs(log_matrix - skew_part(log_matrix, eta)))
                if defect > SKEW_TOLERANCE:
                    notes.append(f"loop {loop_id}: logarithm is not skew (defect {defect:.2e}), sample discarded")
                else:
                    matrices.append(log_matrix)
                    samples.append(HolonomySample(loop_id, loop.start, matrix, log_matrix))
    return matrices, notes, samples


def sample_span(matrices: np.ndarray, rank_tolerance: float,
                threshold: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Principal directions of a stack of matrices.

    Args:
        matrices: Array of shape (count, size, size)
        rank_tolerance: Relative singular-value cut-off
        threshold: Absolute cut-off overriding rank_tolerance

    Returns:
        (Frobenius-orthonormal basis, singular values, rank)
    """
    size = matrices.shape[1]
    if matrices.shape[0] == 0:
        return np.zeros((0, size, size)), np.zeros(0), 0
    flat = matrices.reshape(matrices.shape[0], -1)
    _, singular_values, vt = np.linalg.svd(flat, full_matrices=False)
    if threshold is None:
        threshold = span_threshold(singular_values, rank_tolerance)
    rank = int(np.sum(singular_values >= threshold))
    return vt[:rank].reshape(rank, size, size), singular_values, rank


def span_threshold(singular_values: np.ndarray, rank_tolerance: float) -> float:
    if len(singular_values) == 0:
        return RANK_FLOOR
    return max(rank_tolerance * float(singular_values[0]), RANK_FLOOR)


def closure_residual(basis: np.ndarray) -> float:
    """Largest part of a basis bracket outside the span, relative to the bracket."""
    residual = 0.0
    for a, b in combinations(range(len(basis)), 2):
        bracket = basis[a] @ basis[b] - basis[b] @ basis[a]
        norm = np.linalg.norm(bracket)
        if norm == 0.0:
            continue
        coefficients = np.einsum('kab,ab->k', basis, bracket)
        remainder = bracket - np.einsum('k,kab->ab', coefficients, basis)
        residual = max(residual, float(np.linalg.norm(remainder) / norm))
    return residual


def bracket_closure(matrices: np.ndarray, basis: np.ndarray, singular_values: np.ndarray, threshold: float,
                    eta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Close the sample span under brackets.

    Brackets of the principal directions, weighted by their singular values
    and divided by the largest one, are stacked with the samples and the
    span is taken again at the same absolute threshold. A bracket therefore
    adds a direction only when its new part is as significant as a retained
    sample direction; integration noise in the basis stays below the cut.

    Returns:
        (closed basis, singular values of the last span taken)
    """
    size = basis.shape[1]
    limit = size * (size - 1) // 2
    while 2 <= basis.shape[0] < limit:
        weighted = basis * singular_values[:basis.shape[0], None, None]
        brackets = [skew_part(a @ b - b @ a, eta) / singular_values[0] for a, b in combinations(weighted, 2)]
        stacked = np.concatenate([matrices, np.array(brackets)])
        closed, values, rank = sample_span(stacked, 0.0, threshold)
        if rank <= basis.shape[0]:
            break
        basis, singular_values = closed, values
    return basis, singular_values


def estimate_algebra(spec: ManifoldSpec, c: int = 1, base: Optional[Sequence[float]] = None,
                     loops: Optional[List[CurvePath]] = None, rank_tolerance: float = 1e-6, threads: int = 1,
                     frame_rotation: Optional[np.ndarray] = None, records_per_segment: int = 4,
                     use_logs: bool = True, use_curvature: bool = True) -> HolonomyAlgebra:
    """
    Estimate the holonomy Lie algebra of the rolling connection at a base point.

    Two kinds of evidence feed one span: logarithms of loop transports, and
    curvature endomorphisms sampled along each loop and transported back to
    the base. Rank is read off the singular values of the stacked samples.

    Args:
        spec: Manifold
        c: Curvature parameter
        base: Base point, default the spec's own
        loops: Loops based at base; default generate_loops(spec, base)
        rank_tolerance: Relative singular-value cut-off
        threads: Worker count for the per-loop transports
        frame_rotation: Orthogonal n x n matrix rotating the base frame
        records_per_segment: Curvature sample points per loop segment

    Returns:
        HolonomyAlgebra in the (possibly rotated) fiber basis at the base point
    """
    c = FiberMetric(c).c
    base = spec.require_inside(spec.base_point if base is None else base)
    if loops is None:
        loops = generate_loops(spec, base)
    for index, loop in enumerate(loops):
        if not loop.is_loop or np.max(np.abs(loop.start - base)) > 1e-12:
            raise SpecError(f"loop {index} is not based at {base.tolist()}")
    n = spec.dim
    eta = FiberMetric(c).gram(n)
    conjugator = fiber_basis(spec, base)
    if frame_rotation is not None:
        rotation = np.asarray(frame_rotation, dtype=float)
        if rotation.shape != (n, n) or np.max(np.abs(rotation.T @ rotation - np.eye(n))) > 1e-10:
            raise SpecError("frame rotation must be an orthogonal n x n matrix")
        conjugator = conjugator @ block_diag(rotation, [[1.0]])

    def work(item):
        loop_id, loop = item
        return _loop_evidence(spec, c, loop_id, loop, conjugator, records_per_segment, use_logs, use_curvature)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(work, enumerate(loops)))

    matrices, notes, samples, loop_ends = [], [], [], []
    for loop_matrices, loop_notes, loop_samples in results:
        matrices.extend(skew_part(matrix, eta) for matrix in loop_matrices)
        notes.extend(loop_notes)
        samples.extend(loop_samples)
        loop_ends.append(len(matrices))
    stacked = np.array(matrices) if matrices else np.zeros((0, n + 1, n + 1))
    basis, singular_values, rank = sample_span(stacked, rank_tolerance)
    threshold = span_threshold(singular_values, rank_tolerance)

    half_rank = None
    if len(loops) >= 2:
        half = len(loops) // 2
        _, _, half_rank = sample_span(stacked[:loop_ends[half - 1]], 0.0, threshold)
        if rank > half_rank:
            notes.append(f"rank rose from {half_rank} to {rank} when the loop count doubled from "
                         f"{half} to {len(loops)}")
            logger.warning("holonomy rank of %s is not stable under doubling the loop count (%d -> %d)",
                           spec.name, half_rank, rank)

    closed, _ = bracket_closure(stacked, basis, singular_values, threshold, eta)
    added = closed.shape[0] - rank
    if added:
        notes.append(f"bracket closure added {added} direction(s)")
        logger.warning("bracket closure added %d direction(s) to the sample span of %s", added, spec.name)
    logger.info("estimated holonomy algebra of %s: rank %d from %d samples over %d loops",
                spec.name, closed.shape[0], len(matrices), len(loops))
    algebra = HolonomyAlgebra(
        base=base,
        basis=closed,
        rank=int(closed.shape[0]),
        singular_values=[float(v) for v in singular_values],
        rank_tolerance=rank_tolerance,
        c=c,
        svd_rank=rank,
        closure_added=added,
        closure_residual=closure_residual(closed),
        half_loop_rank=half_rank,
        samples=samples,
        sample_count=len(matrices),
        notes=notes,
    )
    gap = algebra.singular_gap()
    if gap is not None and gap < GAP_WARNING:
        logger.warning("singular value gap %.1f at rank %d; the rank may be unreliable", gap, algebra.rank)
    return algebra


# commutant and classification

def skew_basis(size: int) -> np.ndarray:
    """Frobenius-orthonormal basis (e_i e_j^T - e_j e_i^T) / sqrt(2), i < j."""
    basis = []
    for i in range(size):
        for j in range(i + 1, size):
            E = np.zeros((size, size))
            E[i, j], E[j, i] = -1.0, 1.0
            basis.append(E / np.sqrt(2.0))
    return np.array(basis).reshape(-1, size, size)


def commutant_skew(algebra: HolonomyAlgebra, rcond: float = COMMUTANT_RCOND) -> np.ndarray:
    """
    Skew matrices commuting with every element of the algebra.

    Returns:
        Frobenius-orthonormal basis, shape (d, n+1, n+1)
    """
    size = algebra.size
    candidates = skew_basis(size)
    if algebra.rank == 0:
        return candidates
    columns = []
    for E in candidates:
        columns.append(np.concatenate([(E @ b - b @ E).ravel() for b in algebra.basis]))
    kernel = null_space(np.array(columns).T, rcond=rcond)
    return np.einsum('ak,aij->kij', kernel, candidates)


def unit_complex_structure(generator: np.ndarray) -> np.ndarray:
    """Scale a skew matrix so that its square is -I when it is a multiple of a complex structure."""
    size = generator.shape[0]
    return generator * np.sqrt(size) / np.linalg.norm(generator)


def orbit_dimension(algebra: HolonomyAlgebra, seed: int = 0, tolerance: float = 1e-6) -> int:
    """Dimension of the orbit of a generic unit vector under the algebra."""
    if algebra.rank == 0:
        return 0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(algebra.size)
    v /= np.linalg.norm(v)
    tangent = np.einsum('kab,b->ka', algebra.basis, v)
    values = np.linalg.svd(tangent, compute_uv=False)
    return int(np.sum(values > tolerance * max(1.0, values[0])))


def _label(family: str, n: int) -> str:
    m = (n - 1) // 2
    k = (n - 3) // 4
    return {
        'SO': f"SO({n + 1})",
        'U': f"U({m + 1})",
        'SU': f"SU({m + 1})",
        'Sp': f"Sp({k + 1})",
        'SpSp1': f"Sp({k + 1})Sp(1)",
        'Spin7': "Spin(7)",
        'G2': "G2",
        'TRIVIAL': "TRIVIAL",
        'UNDETERMINED': "UNDETERMINED",
    }[family]


def classify_dimensions(algebra_dim: int, commutant_dim: int, n: int,
                        trace_defect: Optional[float] = None) -> GroupVerdict:
    """
    Match algebra and commutant dimensions against the possible rolling holonomy groups.

    Args:
        algebra_dim: Dimension of the holonomy algebra
        commutant_dim: Dimension of its skew commutant
        n: Dimension of M
        trace_defect: Largest |<b, J>| over the algebra for the unit commutant generator J,
            needed to report SU

    Returns:
        GroupVerdict
    """
    full = (n + 1) * n // 2
    if algebra_dim < 0 or commutant_dim < 0:
        raise ClassificationError("dimensions must be non-negative")
    if algebra_dim > full:
        raise ClassificationError(f"algebra dimension {algebra_dim} exceeds dim so({n + 1}) = {full}")
    if commutant_dim > full:
        raise ClassificationError(f"commutant dimension {commutant_dim} exceeds dim so({n + 1}) = {full}")

    notes = []
    family = 'UNDETERMINED'
    if algebra_dim == 0:
        family = 'TRIVIAL'
        notes.append("trivial holonomy: the rolling distribution is involutive and M has constant curvature 1")
    elif algebra_dim == full:
        family = 'SO'
    elif n % 2 == 1:
        m = (n - 1) // 2
        if commutant_dim == 1 and algebra_dim == (m + 1) ** 2:
            family = 'U'
        elif commutant_dim == 1 and algebra_dim == (m + 1) ** 2 - 1:
            if trace_defect is not None and trace_defect < TRACE_TOLERANCE:
                family = 'SU'
            else:
                notes.append("dimension matches SU but the complex trace check did not pass")
        if n % 4 == 3 and family == 'UNDETERMINED':
            k = (n - 3) // 4
            sp = (k + 1) * (2 * k + 3)
            if commutant_dim == 3 and algebra_dim == sp:
                family = 'Sp'
                if n == 3:
                    notes.append("SU(2) cannot occur as rolling holonomy of a Sasaki-Einstein 3-manifold; "
                                 "the quaternionic commutant identifies Sp(1)")
            elif commutant_dim == 0 and algebra_dim == sp + 3:
                family = 'SpSp1'
        if n == 7 and commutant_dim == 0 and algebra_dim == 21 and family == 'UNDETERMINED':
            family = 'Spin7'
        if m % 2 == 0 and family == 'UNDETERMINED' and commutant_dim == 1:
            notes.append(f"in dimension {n} a Sasaki-Einstein holonomy is either SU({m + 1}) or trivial")
    else:
        if n == 6 and commutant_dim == 0 and algebra_dim == 14:
            family = 'G2'
        else:
            notes.append(f"in even dimension {n} the holonomy is either SO({n + 1})"
                         + (" or G2" if n == 6 else "") + " or trivial")
    if family == 'UNDETERMINED':
        notes.append(f"no candidate group with algebra dimension {algebra_dim} and commutant dimension "
                     f"{commutant_dim} for n = {n}")
    return GroupVerdict(_label(family, n), family, family == 'SO', algebra_dim, commutant_dim, n,
                        trace_defect=trace_defect, notes=notes)


def classify(algebra: HolonomyAlgebra, n: Optional[int] = None,
             commutant: Optional[np.ndarray] = None) -> GroupVerdict:
    """
    Classify an estimated holonomy algebra.

    Args:
        algebra: Output of estimate_algebra
        n: Dimension of M, default inferred from the fiber size
        commutant: Precomputed commutant_skew basis

    Returns:
        GroupVerdict with the orbit dimension of the action on the sphere filled in
    """
    n = algebra.size - 1 if n is None else int(n)
    if algebra.size != n + 1:
        raise ClassificationError(f"algebra acts on dimension {algebra.size}, expected {n + 1}")
    if commutant is None:
        commutant = commutant_skew(algebra)
    trace_defect = None
    if len(commutant) == 1 and algebra.rank > 0:
        J = unit_complex_structure(commutant[0])
        trace_defect = float(np.max(np.abs(np.einsum('kab,ab->k', algebra.basis, J))))
    verdict = classify_dimensions(algebra.rank, len(commutant), n, trace_defect)
    verdict.orbit_dim = orbit_dimension(algebra)
    if 0 < verdict.orbit_dim < n:
        verdict.notes.append(f"holonomy orbits have dimension {verdict.orbit_dim} < {n}: "
                             "the action on the sphere is not transitive")
    if algebra.closure_residual > CLOSURE_TOLERANCE:
        verdict.notes.append(f"bracket closure residual {algebra.closure_residual:.2e}")
    verdict.notes.extend(algebra.notes)
    return verdict


_EXPLANATIONS = {
    'SO': "full rolling holonomy {label}: the rolling system is controllable",
    'U': "holonomy {label} preserves a complex structure on the cone: M is Sasakian, not controllable",
    'SU': "holonomy {label}: M is Sasaki-Einstein, not controllable",
    'Sp': "holonomy {label} preserves a quaternionic triple: M is 3-Sasakian, not controllable",
    'SpSp1': "holonomy {label} preserves a quaternion-Kaehler cone structure, not controllable",
    'Spin7': "holonomy {label}: the cone has Spin(7) holonomy, not controllable",
    'G2': "holonomy {label}: the cone has G2 holonomy, not controllable",
    'TRIVIAL': "trivial holonomy: M has constant curvature 1 and the rolling distribution is involutive, "
               "not controllable",
    'UNDETERMINED': "holonomy could not be matched to a candidate group; treated as not controllable",
}


def controllability(verdict: GroupVerdict) -> Tuple[bool, str]:
    """
    Controllability of the rolling system from a verdict.

    Returns:
        (controllable, explanation)
    """
    explanation = _EXPLANATIONS[verdict.family].format(label=verdict.label)
    if verdict.family == 'UNDETERMINED' and verdict.notes:
        explanation = f"{explanation} ({verdict.notes[-1]})"
    return verdict.family == 'SO', explanation
