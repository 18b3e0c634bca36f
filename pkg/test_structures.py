"""
Tests for Sasakian and 3-Sasakian structure extraction
"""
import numpy as np
import pytest

from errors import StructureError
from geometry import euclidean, heisenberg, sphere
from holonomy import HolonomyAlgebra, estimate_algebra, generate_loops, skew_basis
from structures import (QUATERNION_I, SasakiStructure, build_JR_from_structure, build_JR_triple,
                        epsilon_defect, extend_parallel, extract_3sasaki, extract_sasaki, heisenberg_structure,
                        hopf_structures, invariant_complex_structure, jr_isometry_defect, quaternionic_triple,
                        sphere_seed_triple, verify_sasaki)


def _algebra(basis, n):
    basis = np.asarray(basis, dtype=float).reshape(-1, n + 1, n + 1)
    return HolonomyAlgebra(base=np.zeros(n), basis=basis, rank=basis.shape[0],
                           singular_values=[1.0] * basis.shape[0], rank_tolerance=1e-6)


@pytest.fixture(scope="module")
def heisenberg_samples():
    spec = heisenberg(1)
    algebra = estimate_algebra(spec, 1, loops=generate_loops(spec, steps=128))
    J0 = invariant_complex_structure(algebra)
    targets = np.vstack([spec.base_point[None], spec.random_points(4, seed=1, radius=0.3)])
    return spec, extend_parallel(spec, 1, J0, spec.base_point, targets)


def test_heisenberg_structure_from_holonomy(heisenberg_samples):
    """The extracted Reeb field is d/dz and J X1 = -Y1 at the origin"""
    spec, samples = heisenberg_samples
    assert samples.count == 1
    assert samples.path_residual < 1e-6
    structure = extract_sasaki(spec, samples)
    np.testing.assert_allclose(structure.Z[0], [0.0, 0.0, 1.0], atol=1e-6)
    np.testing.assert_allclose(structure.J[0] @ [1.0, 0.0, 0.0], [0.0, -1.0, 0.0], atol=1e-6)
    assert max(structure.algebraic.values()) < 1e-6


def test_heisenberg_structure_verifies(heisenberg_samples):
    spec, samples = heisenberg_samples
    report = verify_sasaki(spec, extract_sasaki(spec, samples))
    assert report['passed']
    assert max(report['residuals'].values()) < 1e-4
    assert report['omega_min_singular_value'] > 0.1
    # Sasakian but not Einstein
    assert report['einstein_defect'] > 1.0


def test_non_killing_field_fails_verification():
    """Z = x1 d/dx1 on flat space has symmetric derivative diag(1, 0, 0)"""
    spec = euclidean(3)
    structure = SasakiStructure.from_fields(spec, lambda x: np.array([x[0], 0.0, 0.0]), lambda x: np.zeros((3, 3)),
                                            [[1.0, 0.2, 0.1]])
    report = verify_sasaki(spec, structure)
    assert report['residuals']['killing'] == pytest.approx(2.0, abs=1e-6)
    assert not report['passed']


def test_build_from_closed_form_structure():
    spec = heisenberg(1)
    Z_field, J_field = heisenberg_structure(1)
    loops = generate_loops(spec, count=3, seed=0, steps=128)
    samples = build_JR_from_structure(spec, Z_field, J_field, loops=loops)
    assert samples.loop_residual < 1e-5
    assert jr_isometry_defect(samples) < 1e-10
    structure = extract_sasaki(spec, samples)
    assert verify_sasaki(spec, structure)['passed']
    for x, Z, J in zip(samples.points, structure.Z, structure.J):
        np.testing.assert_allclose(Z, Z_field(x), atol=1e-10)
        np.testing.assert_allclose(J, J_field(x), atol=1e-10)


def test_extracted_structure_matches_closed_form(heisenberg_samples):
    """Holonomy recovers the standard structure up to one global sign"""
    spec, samples = heisenberg_samples
    structure = extract_sasaki(spec, samples)
    Z_field, J_field = heisenberg_structure(1)
    sign = np.sign(np.dot(structure.Z[0], Z_field(structure.points[0])))
    assert sign != 0.0
    for x, Z, J in zip(structure.points, structure.Z, structure.J):
        np.testing.assert_allclose(sign * Z, Z_field(x), atol=1e-5)
        np.testing.assert_allclose(sign * J, J_field(x), atol=1e-5)


@pytest.mark.slow
def test_build_from_closed_form_structure_full_family():
    spec = heisenberg(1)
    Z_field, J_field = heisenberg_structure(1)
    samples = build_JR_from_structure(spec, Z_field, J_field, loop_count=50)
    assert samples.loop_residual < 1e-5


def test_build_rejects_incompatible_structure():
    spec = euclidean(3)
    with pytest.raises(StructureError):
        build_JR_from_structure(spec, lambda x: np.array([np.cos(x[1]), np.sin(x[1]), 0.0]),
                                lambda x: np.zeros((3, 3)), loops=[])


def test_quaternionic_triple():
    assert epsilon_defect(quaternionic_triple(8)) == 0.0
    with pytest.raises(StructureError):
        quaternionic_triple(6)


def test_no_invariant_structure_for_full_algebra():
    full = _algebra(skew_basis(4), 3)
    with pytest.raises(StructureError):
        invariant_complex_structure(full)
    with pytest.raises(StructureError):
        invariant_complex_structure(full, seed=QUATERNION_I)


def test_large_commutant_needs_seed():
    J = np.zeros((4, 4))
    J[0, 1], J[1, 0], J[2, 3], J[3, 2] = -1.0, 1.0, -1.0, 1.0
    with pytest.raises(StructureError):
        invariant_complex_structure(_algebra(J / 2.0, 3))


def test_hopf_triple_on_seven_sphere():
    """The three Hopf structures of S^7 satisfy the quaternion relations on the fiber"""
    spec = sphere(7)
    points = spec.random_points(3, seed=2, radius=0.3)
    samples, report = build_JR_triple(spec, hopf_structures(7), points)
    assert samples.count == 3
    for key in ('cone_vector', 'contact_distribution', 'reeb_span', 'squares', 'Z_orthonormal', 'brackets'):
        assert report[key] < 1e-5, key
    three = extract_3sasaki(spec, samples)
    assert three.residuals['epsilon_relations'] < 1e-10
    assert three.residuals['J_i_Z_j'] < 1e-5


def test_triple_extended_from_seed():
    spec = sphere(7)
    algebra = _algebra(np.zeros((0, 8, 8)), 7)
    triple = invariant_complex_structure(algebra, seed=sphere_seed_triple(7))
    targets = np.vstack([spec.base_point[None], spec.random_points(2, seed=4, radius=0.2)])
    samples = extend_parallel(spec, 1, triple, spec.base_point, targets, check_paths=False)
    three = extract_3sasaki(spec, samples)
    assert three.residuals['epsilon_relations'] < 1e-8
    assert three.residuals['Z_orthonormal'] < 1e-6
    assert three.residuals['brackets'] < 1e-4


def test_triple_needs_three_fields():
    with pytest.raises(StructureError):
        build_JR_triple(sphere(7), hopf_structures(7)[:2])


if __name__ == "__main__":
    print("Running structure tests...\n")
    test_non_killing_field_fails_verification()
    test_build_from_closed_form_structure()
    test_hopf_triple_on_seven_sphere()
    print("All tests completed!")
