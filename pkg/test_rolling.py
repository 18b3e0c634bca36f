"""
Tests for kinematic rolling on the unit sphere
"""
import numpy as np
import pytest

from curves import CurvePath
from errors import SpecError
from geometry import euclidean, heisenberg, sphere
from holonomy import generate_loops, random_rotation
from rolling import (RollingState, develop, holonomy_crosscheck, rolling_residuals, sphere_self_contact,
                     standard_state)


def _rotation(angle):
    return np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])


def test_constant_curve_keeps_state():
    spec = euclidean(2)
    q0 = standard_state(spec, [0.3, 0.4])
    trajectory = develop(spec, CurvePath.constant([0.3, 0.4], steps=16))
    np.testing.assert_allclose(trajectory.final.configuration(), q0.configuration(), atol=1e-15)
    assert rolling_residuals(trajectory) == (0.0, 0.0)


def test_residuals_along_smooth_loop():
    spec = heisenberg(1)
    loop = generate_loops(spec, count=1, seed=6, steps=256)[-1]
    trajectory = develop(spec, loop)
    ns, nt = rolling_residuals(trajectory)
    assert ns < 1e-6
    assert nt < 1e-6
    assert trajectory.final.defect() < 1e-9


def test_twisted_trajectory_is_detected():
    """Spinning the frame about the contact normal violates no-twist"""
    spec = euclidean(2)
    curve = CurvePath.polyline([[0.0, 0.0], [0.5, 0.2]], steps=128)
    trajectory = develop(spec, curve)
    for index, (t, state) in enumerate(zip(trajectory.times, trajectory.states)):
        trajectory.states[index] = RollingState(state.x, state.xhat, state.A_frame @ _rotation(0.1 * t))
    ns, nt = rolling_residuals(trajectory, spec, curve)
    assert nt > 1e-3


def test_plate_rolls_ball_around_great_circle():
    """A straight line of length 2 pi on the plane rolls the ball back to its start"""
    spec = euclidean(2)
    line = CurvePath.polyline([[0.0, 0.0], [2.0 * np.pi, 0.0]], steps=512)
    trajectory = develop(spec, line)
    start = trajectory.states[0].configuration()
    np.testing.assert_allclose(trajectory.final.configuration(), start, atol=1e-6)
    halfway = trajectory.states[256]
    np.testing.assert_allclose(halfway.xhat, [0.0, 0.0, -1.0], atol=1e-6)


def test_flat_square_crosscheck():
    spec = euclidean(2)
    report = holonomy_crosscheck(spec, CurvePath.rectangle([0.0, 0.0], 0, 1, 0.5, steps=256))
    assert report['residual'] < 1e-4
    assert report['ns_residual'] < 1e-6
    kinematic = np.array(report['kinematic'])
    np.testing.assert_allclose(kinematic.T @ kinematic, np.eye(3), atol=1e-9)
    assert np.max(np.abs(kinematic - np.eye(3))) > 1e-2


def test_heisenberg_crosscheck():
    spec = heisenberg(1)
    loop = generate_loops(spec, count=1, seed=2, steps=256)[-1]
    assert holonomy_crosscheck(spec, loop)['residual'] < 1e-4


def test_crosscheck_converges_at_high_order():
    spec = heisenberg(1)
    loop = generate_loops(spec, count=1, seed=2)[-1]
    residuals = [holonomy_crosscheck(spec, loop, steps=steps)['residual'] for steps in (8, 16, 32)]
    slope = -np.polyfit(np.log([8, 16, 32]), np.log(residuals), 1)[0]
    assert slope >= 3.0


def test_development_commutes_with_sphere_rotations():
    """Rotating the initial contact configuration rotates the whole trajectory"""
    spec = heisenberg(1)
    loop = generate_loops(spec, count=1, seed=4, steps=128)[-1]
    q0 = standard_state(spec, loop.start)
    R = random_rotation(4, seed=9)
    plain = develop(spec, loop, q0)
    rotated = develop(spec, loop, q0.transformed(R))
    expected = plain.final.transformed(R)
    np.testing.assert_allclose(rotated.final.xhat, expected.xhat, atol=1e-10)
    np.testing.assert_allclose(rotated.final.A_frame, expected.A_frame, atol=1e-10)
    np.testing.assert_allclose(rotated.final.x, plain.final.x, atol=1e-14)
    assert rolling_residuals(rotated) == pytest.approx(rolling_residuals(plain), abs=1e-10)


def test_sphere_on_itself_has_trivial_holonomy():
    spec = sphere(2)
    loop = generate_loops(spec, count=1, seed=5, steps=256)[-1]
    report = holonomy_crosscheck(spec, loop, sphere_self_contact(loop.start))
    assert report['residual'] < 1e-6
    np.testing.assert_allclose(report['kinematic'], np.eye(3), atol=1e-6)


def test_trajectory_document():
    spec = euclidean(2)
    trajectory = develop(spec, CurvePath.polyline([[0.0, 0.0], [0.1, 0.0]], steps=8))
    rows = trajectory.to_document()
    assert len(rows) == 9
    assert set(rows[0]) == {'t', 'x', 'xhat', 'frame', 'ns', 'nt'}
    assert rows[-1]['t'] == pytest.approx(1.0)


def test_invalid_states():
    spec = euclidean(2)
    with pytest.raises(SpecError):
        RollingState([0.0, 0.0], [0.0, 0.0, 2.0], np.eye(3)[:, :2]).validate()
    with pytest.raises(SpecError):
        RollingState([0.0, 0.0], [0.0, 0.0, 1.0], np.eye(3)[:, [0, 2]]).validate()
    with pytest.raises(SpecError):
        develop(spec, CurvePath.polyline([[0.0, 0.0], [1.0, 0.0]], steps=8), standard_state(spec, [1.0, 1.0]))
    with pytest.raises(SpecError):
        holonomy_crosscheck(spec, CurvePath.polyline([[0.0, 0.0], [1.0, 0.0]], steps=8))


if __name__ == "__main__":
    print("Running rolling tests...\n")
    test_constant_curve_keeps_state()
    test_plate_rolls_ball_around_great_circle()
    test_flat_square_crosscheck()
    print("All tests completed!")
