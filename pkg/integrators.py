"""
Classical fixed-step fourth-order Runge-Kutta integration.

No adaptive stepping: a run is reproducible from its step count alone, and
halving the step shrinks the error by the textbook factor 16.
"""
from typing import Callable, List, Optional, Tuple

import numpy as np

from errors import IntegrationError

MAX_STEPS = 1 << 20

Generator = Callable[[np.ndarray, np.ndarray], np.ndarray]


def check_steps(steps: int) -> int:
    steps = int(steps)
    if steps < 1 or steps > MAX_STEPS:
        raise IntegrationError(f"step count {steps} outside [1, {MAX_STEPS}]")
    return steps


def rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, t0: float, t1: float,
              steps: int, callback: Optional[Callable[[float, np.ndarray], None]] = None) -> np.ndarray:
    """
    Integrate y' = rhs(t, y) from t0 to t1 in a fixed number of steps.

    Args:
        rhs: Right-hand side
        y0: Initial state
        t0, t1: Integration interval
        steps: Number of equal steps
        callback: Called with (t, y) after every step

    Returns:
        State at t1
    """
    steps = check_steps(steps)
    h = (t1 - t0) / steps
    y = np.array(y0, dtype=float)
    for k in range(steps):
        t = t0 + k * h
        y = rk4_step(rhs, t, y, h)
        if callback is not None:
            callback(t + h, y)
    return y


def propagate_linear(generator: Generator, curve, dim: int, steps: int,
                     record_every: int = 0) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
    """
    Fundamental matrix of the linear system Y' = G(x(t), x'(t)) Y along a curve.

    The generator is evaluated once per step end and once per midpoint, the
    midpoint value being shared by the two middle stages.

    Args:
        generator: Maps (position, velocity) to a dim x dim matrix
        curve: CurvePath to follow, every segment on t in [0, 1]
        dim: Size of the system
        steps: Steps per segment
        record_every: If positive, also return (point, Y) every that many steps

    Returns:
        Tuple of (final fundamental matrix, recorded samples)
    """
    steps = check_steps(steps)
    h = 1.0 / steps
    Y = np.eye(dim)
    records = []
    if record_every > 0:
        records.append((curve.start.copy(), Y.copy()))
    for segment in curve.segments:
        G0 = generator(*segment.jet(0.0))
        for k in range(steps):
            t = k * h
            Gm = generator(*segment.jet(t + 0.5 * h))
            G1 = generator(*segment.jet(t + h))
            k1 = G0 @ Y
            k2 = Gm @ (Y + 0.5 * h * k1)
            k3 = Gm @ (Y + 0.5 * h * k2)
            k4 = G1 @ (Y + h * k3)
            Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            G0 = G1
            if record_every > 0 and (k + 1) % record_every == 0:
                records.append((segment.position(t + h), Y.copy()))
    return Y, records
