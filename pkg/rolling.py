"""
Rolling a manifold M on the unit sphere S^n without slipping or twisting.

The sphere side lives in R^{n+1}. Internally the state is an M-parallel
frame V along x(t) and an orthogonal matrix Q = [W | xhat], where W holds
the images A V. No slipping and no twisting together read

    V' = -Gamma(x') V,    Q' = Q [[0, c], [-c^T, 0]],    c = V^T g x'.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from connections import rolling_transport
from curves import CurvePath
from errors import SpecError
from geometry import (ManifoldSpec, _christoffel_from, _frame_from_metric, eval_metric, metric_derivatives,
                      stereographic_embedding, stereographic_jacobian)
from integrators import check_steps, rk4_step

logger = logging.getLogger(__name__)

STATE_TOLERANCE = 1e-8
REORTHONORMALIZE_ABOVE = 1e-9


@dataclass
class RollingState:
    """
    Contact configuration: point x of M, point xhat of S^n and the images
    A_frame (n columns in R^{n+1}) of the Gram-Schmidt frame of T_xM.
    """
    x: np.ndarray
    xhat: np.ndarray
    A_frame: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.xhat = np.asarray(self.xhat, dtype=float)
        self.A_frame = np.asarray(self.A_frame, dtype=float)

    def configuration(self) -> np.ndarray:
        """[A_frame | xhat] as an (n+1) x (n+1) matrix."""
        return np.column_stack([self.A_frame, self.xhat])

    def defect(self) -> float:
        G = self.configuration()
        return float(np.max(np.abs(G.T @ G - np.eye(G.shape[1]))))

    def validate(self, tolerance: float = STATE_TOLERANCE):
        n = len(self.x)
        if self.xhat.shape != (n + 1,) or self.A_frame.shape != (n + 1, n):
            raise SpecError(f"rolling state for dimension {n} needs xhat in R^{n + 1} and {n} frame columns")
        if abs(np.linalg.norm(self.xhat) - 1.0) > 1e-9:
            raise SpecError("xhat is not a unit vector")
        if self.defect() > tolerance:
            raise SpecError(f"frame columns are not orthonormal and tangent (defect {self.defect():.2e})")

    def transformed(self, rotation: np.ndarray) -> 'RollingState':
        return RollingState(self.x.copy(), rotation @ self.xhat, rotation @ self.A_frame)

    def to_dict(self) -> Dict:
        return {'x': self.x.tolist(), 'xhat': self.xhat.tolist(), 'frame': self.A_frame.T.tolist()}


def standard_state(spec: ManifoldSpec, x: Optional[Sequence[float]] = None) -> RollingState:
    """Contact at the last basis vector with the frame sent to e_1..e_n."""
    x = spec.require_inside(spec.base_point if x is None else x)
    n = spec.dim
    identity = np.eye(n + 1)
    return RollingState(x, identity[:, n], identity[:, :n])


def sphere_self_contact(x: Sequence[float], radius: float = 1.0) -> RollingState:
    """Unit sphere (stereographic chart) touching its embedded copy at the same point."""
    x = np.asarray(x, dtype=float)
    jacobian = stereographic_jacobian(x, radius)
    q = 1.0 + x @ x
    frame = jacobian * (q / (2.0 * radius))
    return RollingState(x, stereographic_embedding(x, radius) / radius, frame)


@dataclass
class RollingTrajectory:
    times: np.ndarray
    states: List[RollingState]
    parallel_frames: np.ndarray = field(repr=False)
    segment_slices: List[slice] = field(repr=False, default_factory=list)
    ns_residuals: np.ndarray = field(default=None)
    nt_residuals: np.ndarray = field(default=None)
    reorthonormalizations: int = 0
    steps: int = 0

    @property
    def final(self) -> RollingState:
        return self.states[-1]

    def to_document(self) -> List[Dict]:
        rows = []
        for index, (t, state) in enumerate(zip(self.times, self.states)):
            row = {'t': float(t), **state.to_dict()}
            if self.ns_residuals is not None:
                row['ns'] = float(self.ns_residuals[index])
                row['nt'] = float(self.nt_residuals[index])
            rows.append(row)
        return rows


def _rhs(spec: ManifoldSpec, n: int, segment):
    def rhs(t, y):
        position, velocity = segment.jet(t)
        V = y[:n * n].reshape(n, n)
        Q = y[n * n:].reshape(n + 1, n + 1)
        g, dg = metric_derivatives(spec, position)
        gamma = _christoffel_from(g, dg)
        c = V.T @ g @ velocity
        omega = np.zeros((n + 1, n + 1))
        omega[:n, n] = c
        omega[n, :n] = -c
        dV = -np.einsum('kij,i,jl->kl', gamma, velocity, V)
        return np.concatenate([dV.ravel(), (Q @ omega).ravel()])
    return rhs


def _nearest_orthogonal(Q: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(Q)
    return U @ Vt


def develop(spec: ManifoldSpec, curve: CurvePath, q0: Optional[RollingState] = None,
            steps: Optional[int] = None) -> RollingTrajectory:
    """
    Roll M on S^n along a curve of M.

    Args:
        spec: Manifold M
        curve: Curve in the chart of M
        q0: Initial state over curve.start; default standard_state
        steps: Steps per segment, default the curve's own count

    Returns:
        RollingTrajectory sampled at every step, with NS/NT residual series filled in
    """
    n = spec.dim
    if curve.dim != n:
        raise SpecError(f"curve has {curve.dim} coordinates, {spec.name} has {n}")
    q0 = standard_state(spec, curve.start) if q0 is None else q0
    q0.validate()
    if np.max(np.abs(q0.x - curve.start)) > 1e-12:
        raise SpecError("initial state is not over the start of the curve")
    steps = check_steps(steps or curve.steps_per_segment)

    E0 = _frame_from_metric(eval_metric(spec, q0.x))
    V = E0.copy()
    Q = np.column_stack([q0.A_frame, q0.xhat])
    y = np.concatenate([V.ravel(), Q.ravel()])
    h = 1.0 / steps

    times, xs, frames, Vs, slices = [0.0], [q0.x.copy()], [Q.copy()], [V.copy()], []
    corrections = 0
    for index, segment in enumerate(curve.segments):
        rhs = _rhs(spec, n, segment)
        first = len(times) - 1
        for k in range(steps):
            y = rk4_step(rhs, k * h, y, h)
            position = segment.position((k + 1) * h)
            spec.require_inside(position)
            Q = y[n * n:].reshape(n + 1, n + 1)
            if np.max(np.abs(Q.T @ Q - np.eye(n + 1))) > REORTHONORMALIZE_ABOVE:
                Q = _nearest_orthogonal(Q)
                y[n * n:] = Q.ravel()
                corrections += 1
            times.append(index + (k + 1) * h)
            xs.append(position)
            frames.append(Q.copy())
            Vs.append(y[:n * n].reshape(n, n).copy())
        slices.append(slice(first, len(times)))

    states = []
    for x, Q, V in zip(xs, frames, Vs):
        E = _frame_from_metric(eval_metric(spec, x))
        A_frame = Q[:, :n] @ np.linalg.solve(V, E)
        states.append(RollingState(x, Q[:, n].copy(), A_frame))
    if corrections:
        logger.info("development of %s re-orthonormalized %d time(s)", spec.name, corrections)
    trajectory = RollingTrajectory(np.array(times), states, np.array(Vs), slices,
                                   reorthonormalizations=corrections, steps=steps)
    trajectory.ns_residuals, trajectory.nt_residuals = residual_series(spec, curve, trajectory)
    return trajectory


def _five_point(values: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Fourth-order central first derivative at the interior indices 2..len-3."""
    if len(values) < 5:
        return np.arange(0), np.zeros((0,) + values.shape[1:])
    derivative = (values[:-4] - 8.0 * values[1:-3] + 8.0 * values[3:-1] - values[4:]) / (12.0 * h)
    return np.arange(2, len(values) - 2), derivative


def residual_series(spec: ManifoldSpec, curve: CurvePath, trajectory: RollingTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-sample no-slip and no-twist residuals from finite differences of the
    stored states.

    NS: |xhat' - A x'|. NT: tangential part of d/dt (A V) for the M-parallel frame V,
    which is the sphere covariant derivative of A V.
    """
    ns = np.zeros(len(trajectory.times))
    nt = np.zeros(len(trajectory.times))
    n = spec.dim
    h = 1.0 / trajectory.steps
    for segment, span in zip(curve.segments, trajectory.segment_slices):
        states = trajectory.states[span]
        xhat = np.array([s.xhat for s in states])
        images = []
        for s, V in zip(states, trajectory.parallel_frames[span]):
            E = _frame_from_metric(eval_metric(spec, s.x))
            images.append(s.A_frame @ np.linalg.solve(E, V))
        images = np.array(images)
        indices, xhat_dot = _five_point(xhat, h)
        _, images_dot = _five_point(images, h)
        offset = span.start
        for local, d_xhat, d_images in zip(indices, xhat_dot, images_dot):
            state = states[local]
            t = local * h
            velocity = segment.velocity(min(t, 1.0))
            g = eval_metric(spec, state.x)
            E = _frame_from_metric(g)
            slip = d_xhat - state.A_frame @ (E.T @ g @ velocity)
            normal = np.outer(state.xhat, state.xhat)
            twist = d_images - normal @ d_images
            ns[offset + local] = np.linalg.norm(slip)
            nt[offset + local] = np.linalg.norm(twist, 2)
    return ns, nt


def rolling_residuals(trajectory: RollingTrajectory, spec: Optional[ManifoldSpec] = None,
                      curve: Optional[CurvePath] = None) -> Tuple[float, float]:
    """
    Largest NS and NT residuals of a trajectory.

    With spec and curve given the series are recomputed from the stored states,
    so edited trajectories are judged on their current contents.
    """
    if spec is not None and curve is not None:
        ns, nt = residual_series(spec, curve, trajectory)
    else:
        ns, nt = trajectory.ns_residuals, trajectory.nt_residuals
    return float(np.max(ns, initial=0.0)), float(np.max(nt, initial=0.0))


def holonomy_crosscheck(spec: ManifoldSpec, loop: CurvePath, q0: Optional[RollingState] = None,
                        steps: Optional[int] = None) -> Dict:
    """
    Compare the kinematic holonomy of a rolled loop with rolling-connection transport.

    The development maps G0 = [A_frame | xhat] at the start to G1 at the end;
    with P the rolling transport (c = 1) in the fiber basis, G1 = G0 P^-1, so
    the element g = G1 G0^T of SO(n+1) must equal G0 P^-1 G0^T.

    Returns:
        Report with the Frobenius residual and both matrices
    """
    if not loop.is_loop:
        raise SpecError("holonomy cross-check needs a closed loop")
    trajectory = develop(spec, loop, q0, steps)
    G0 = trajectory.states[0].configuration()
    G1 = trajectory.final.configuration()
    kinematic = G1 @ G0.T
    transport = rolling_transport(spec, 1, loop, steps)
    predicted = G0 @ np.linalg.inv(transport.matrix) @ G0.T
    residual = float(np.linalg.norm(kinematic - predicted))
    ns, nt = rolling_residuals(trajectory)
    logger.debug("kinematic holonomy cross-check residual %.2e", residual)
    return {
        'residual': residual,
        'kinematic': kinematic.tolist(),
        'transport': transport.matrix.tolist(),
        'ns_residual': ns,
        'nt_residual': nt,
        'reorthonormalizations': trajectory.reorthonormalizations,
        'steps': trajectory.steps,
    }
