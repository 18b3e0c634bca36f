"""
Tests for the rolling connection and the cone comparison
"""
import numpy as np
import pytest
from scipy.linalg import expm

from connections import (FiberMetric, FiberVector, cone_covariant, cone_covariant_generic, cone_isomorphism,
                         cone_spec, fiber_inner, loop_curvature, rolling_curvature, rolling_derivative,
                         rolling_transport, verify_cone_isomorphism)
from curves import CurvePath
from errors import SpecError
from geometry import eval_metric, euclidean, frame_field, heisenberg, hyperbolic, sphere
from holonomy import generate_loops


def test_rolling_derivative_flat():
    """Direct substitution into the definition on the plane"""
    spec = euclidean(2)
    u = rolling_derivative(spec, 1, ([0.0, 1.0], 1.0), [1.0, 0.0], [0.0, 0.0])
    np.testing.assert_allclose(u.as_array(), [1.0, 0.0, 0.0], atol=1e-12)
    v = rolling_derivative(spec, 1, ([1.0, 0.0], 0.0), [1.0, 0.0], [0.0, 0.0])
    np.testing.assert_allclose(v.as_array(), [0.0, 0.0, -1.0], atol=1e-12)


def test_rolling_derivative_of_reeb_field():
    """Along X1 the section (Z, 0) differentiates to (-Y1, 0)"""
    spec = heisenberg(1)
    X1, Y1, Z = (frame_field(spec, a) for a in range(3))
    for x in spec.random_points(5, seed=2):
        u = rolling_derivative(spec, 1, (Z, 0.0), X1(x), x)
        np.testing.assert_allclose(u.tangent_part, -Y1(x), atol=1e-7)
        assert u.scalar_part == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("c, expected", [(1, 6.0), (-1, -6.0)])
def test_fiber_inner(c, expected):
    base = np.zeros(2)
    assert fiber_inner(c, FiberVector(base, [0, 0], 2.0), FiberVector(base, [0, 0], 3.0)) == expected
    assert fiber_inner(c, FiberVector(base, [1, 0], 0.0), FiberVector(base, [0, 0], 1.0)) == 0.0


def test_fiber_inner_uses_metric_and_base():
    spec = heisenberg(1)
    x = np.array([1.0, 0.0, 0.0])
    u = FiberVector(x, [0.0, 1.0, 0.0], 0.0)
    assert fiber_inner(1, u, u, spec) == pytest.approx(2.0)
    with pytest.raises(SpecError):
        fiber_inner(1, u, FiberVector(np.zeros(3), [0, 1, 0], 0.0))


def test_bad_curvature_parameter():
    with pytest.raises(SpecError):
        FiberMetric(2)


def test_constant_curve_transport_is_identity():
    spec = heisenberg(1)
    operator = rolling_transport(spec, 1, CurvePath.constant([0.1, 0.2, 0.3], steps=8))
    np.testing.assert_allclose(operator.matrix, np.eye(4), atol=1e-14)


def test_unit_sphere_transport_is_trivial():
    """The rolling connection of the unit sphere is flat"""
    spec = sphere(3)
    for loop in generate_loops(spec, count=3, seed=5, steps=128)[-3:]:
        operator = rolling_transport(spec, 1, loop)
        np.testing.assert_allclose(operator.matrix, np.eye(4), atol=1e-6)


def test_small_square_matches_curvature():
    """Holonomy of a coordinate square of side delta is exp(-delta^2 F) up to O(delta^3)"""
    spec = euclidean(2)
    delta = 0.1
    square = CurvePath.rectangle([0.0, 0.0], 0, 1, delta, steps=64)
    P = rolling_transport(spec, 1, square).matrix
    F = rolling_curvature(spec, 1, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).matrix
    assert np.max(np.abs(P - expm(-delta ** 2 * F))) < 2.0 * delta ** 3
    curvature = loop_curvature(spec, 1, [0.0, 0.0], 0, 1)
    np.testing.assert_allclose(curvature, F, atol=1e-2)


def test_small_loop_curvature_law_order():
    """Deviation of -log(P)/delta^2 from F shrinks with the square side"""
    spec = heisenberg(1)
    x = np.array([0.1, -0.2, 0.0])
    F = rolling_curvature(spec, 1, x, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).matrix
    errors = [np.max(np.abs(loop_curvature(spec, 1, x, 0, 1, delta, steps=32) - F)) for delta in (0.04, 0.02, 0.01)]
    assert errors[2] < errors[1] < errors[0]


def test_transport_metricity_order():
    """The fiber metric defect of fixed-step transport converges at high order"""
    spec = heisenberg(1)
    square = CurvePath.rectangle([0.1, 0.0, 0.2], 0, 1, 0.2)
    defects = [rolling_transport(spec, 1, square, steps).preservation_defect() for steps in (4, 8, 16)]
    slope = -np.polyfit(np.log([4, 8, 16]), np.log(defects), 1)[0]
    assert slope >= 3.0


def test_transport_composes_along_concatenation():
    spec = heisenberg(1)
    first = CurvePath.polyline([[0.0, 0.0, 0.0], [0.3, -0.1, 0.2]], steps=256)
    second = CurvePath.polyline([[0.3, -0.1, 0.2], [0.1, 0.25, -0.15]], steps=256)
    P_first = rolling_transport(spec, 1, first).matrix
    P_second = rolling_transport(spec, 1, second).matrix
    P_joined = rolling_transport(spec, 1, first.then(second)).matrix
    np.testing.assert_allclose(P_joined, P_second @ P_first, atol=1e-12)


@pytest.mark.parametrize("c", [1, -1])
def test_reversed_curve_inverts_transport(c):
    spec = heisenberg(1)
    curve = CurvePath.polyline([[0.0, 0.0, 0.0], [0.3, -0.1, 0.2], [0.1, 0.25, -0.15]], steps=256)
    P = rolling_transport(spec, c, curve).matrix
    P_back = rolling_transport(spec, c, curve.reversed()).matrix
    np.testing.assert_allclose(P_back, np.linalg.inv(P), atol=1e-8)
    np.testing.assert_allclose(P_back @ P, np.eye(4), atol=1e-8)


def test_unit_sphere_rolling_curvature_vanishes():
    spec = sphere(3)
    rng = np.random.default_rng(4)
    worst = 0.0
    for x in spec.random_points(200, seed=8):
        X, Y = rng.standard_normal((2, 3))
        endo = rolling_curvature(spec, 1, x, X, Y)
        worst = max(worst, np.max(np.abs(endo.matrix)))
    assert worst < 1e-7


def test_hyperbolic_space_is_flat_for_negative_parameter():
    endo = rolling_curvature(hyperbolic(3), -1, [0.2, 0.1, 1.3], [1, 0, 0], [0, 0, 1])
    assert np.max(np.abs(endo.matrix)) < 1e-7


def test_cone_metric():
    spec = sphere(2)
    cone = cone_spec(spec)
    expected = np.eye(3)
    expected[:2, :2] = 4.0 * eval_metric(spec, [0.3, -0.1])
    np.testing.assert_allclose(eval_metric(cone, [0.3, -0.1, 2.0]), expected, rtol=1e-14)


def test_cone_covariant_rules():
    cone = cone_spec(heisenberg(1))
    Y0 = np.array([0.3, -0.1, 0.5])
    result = cone_covariant(cone, (Y0, 0.0), 'ds', [0.1, 0.2, 0.0, 2.0])
    np.testing.assert_allclose(result, np.append(Y0 / 2.0, 0.0), atol=1e-12)
    zero = cone_covariant(cone, ([0.0, 0.0, 0.0], 0.0), [1.0, 0.0, 0.0], [0.1, 0.2, 0.0, 2.0])
    np.testing.assert_allclose(zero, 0.0, atol=1e-12)


def test_cone_covariant_matches_cone_christoffel():
    cone = cone_spec(heisenberg(1))
    section = (lambda p: np.array([p[1], p[0] * p[3], 1.0]), lambda p: p[2] + p[3])
    point = [0.2, -0.3, 0.1, 1.5]
    for direction in ('ds', [1.0, 0.5, -0.2]):
        np.testing.assert_allclose(cone_covariant(cone, section, direction, point),
                                   cone_covariant_generic(cone, section, direction, point), atol=1e-7)


def test_cone_isomorphism_map():
    X, b = cone_isomorphism(2.0, [1.0, -1.0, 0.5], 3.0)
    np.testing.assert_allclose(X, [2.0, -2.0, 1.0])
    assert b == 3.0


def test_constant_cone_loop():
    spec = heisenberg(1)
    report = verify_cone_isomorphism(spec, CurvePath.constant([0.0, 0.0, 0.0, 1.0], steps=8))
    assert report['residual'] < 1e-14


@pytest.mark.parametrize("s0", [0.5, 1.0, 3.0])
def test_cone_isomorphism_heisenberg(s0):
    """Cone holonomy conjugated by the isomorphism equals rolling holonomy"""
    spec = heisenberg(1)
    cone = cone_spec(spec)
    base = np.array([0.0, 0.0, 0.0, s0])
    loops = generate_loops(cone, base, count=4, seed=1, steps=256)[-4:]
    for loop in loops:
        assert verify_cone_isomorphism(spec, loop, s0, cone=cone)['residual'] < 1e-5


@pytest.mark.slow
@pytest.mark.parametrize("s0", [0.5, 1.0, 3.0])
def test_cone_isomorphism_heisenberg_full_family(s0):
    spec = heisenberg(1)
    cone = cone_spec(spec)
    base = np.array([0.0, 0.0, 0.0, s0])
    loops = generate_loops(cone, base, count=100, seed=17, steps=512)[-100:]
    residuals = [verify_cone_isomorphism(spec, loop, s0, cone=cone)['residual'] for loop in loops]
    assert max(residuals) < 1e-5


def test_cone_isomorphism_convergence():
    spec = heisenberg(1)
    cone = cone_spec(spec)
    loop = generate_loops(cone, np.array([0.0, 0.0, 0.0, 1.0]), count=1, seed=3, steps=32)[-1]
    coarse = verify_cone_isomorphism(spec, loop, 1.0, steps=32, cone=cone)['residual']
    fine = verify_cone_isomorphism(spec, loop, 1.0, steps=64, cone=cone)['residual']
    assert fine * 8.0 <= coarse


if __name__ == "__main__":
    print("Running connection tests...\n")
    test_rolling_derivative_flat()
    test_unit_sphere_transport_is_trivial()
    test_small_square_matches_curvature()
    test_cone_isomorphism_heisenberg(1.0)
    print("All tests completed!")
