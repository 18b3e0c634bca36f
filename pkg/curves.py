"""
Curves in a coordinate chart, made of segments parametrised on [0, 1].
"""
from typing import Dict, List, Optional, Sequence

import numpy as np

from errors import SpecError
from expressions import as_expr, compile_array

JOIN_TOLERANCE = 1e-12
DEFAULT_STEPS = 512


class Segment:
    """A smooth map [0, 1] -> chart with known velocity."""

    def position(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def velocity(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def jet(self, t: float):
        return self.position(t), self.velocity(t)

    def reversed(self) -> 'Segment':
        return ReversedSegment(self)

    def to_document(self) -> Dict:
        raise NotImplementedError

    @property
    def start(self) -> np.ndarray:
        return self.position(0.0)

    @property
    def end(self) -> np.ndarray:
        return self.position(1.0)


class LinearSegment(Segment):
    def __init__(self, start: Sequence[float], end: Sequence[float]):
        self.a = np.asarray(start, dtype=float)
        self.b = np.asarray(end, dtype=float)
        self.direction = self.b - self.a

    def position(self, t):
        if t == 1.0:
            return self.b.copy()
        return self.a + t * self.direction

    def velocity(self, t):
        return self.direction.copy()

    def reversed(self):
        return LinearSegment(self.b, self.a)

    def to_document(self):
        return {'type': 'polyline', 'points': [self.a.tolist(), self.b.tolist()]}


class TrigSegment(Segment):
    """
    Closed trigonometric loop
    x(t) = c + sum_k a_k (cos(2 pi k t) - 1) + b_k sin(2 pi k t).
    """

    def __init__(self, center: Sequence[float], cos_coeffs: np.ndarray, sin_coeffs: np.ndarray):
        self.center = np.asarray(center, dtype=float)
        self.cos_coeffs = np.atleast_2d(np.asarray(cos_coeffs, dtype=float))
        self.sin_coeffs = np.atleast_2d(np.asarray(sin_coeffs, dtype=float))
        self.frequencies = 2.0 * np.pi * np.arange(1, self.cos_coeffs.shape[0] + 1)

    def position(self, t):
        if t == 0.0 or t == 1.0:
            return self.center.copy()
        phase = self.frequencies * t
        return (self.center + (np.cos(phase) - 1.0) @ self.cos_coeffs
                + np.sin(phase) @ self.sin_coeffs)

    def velocity(self, t):
        phase = self.frequencies * t
        return ((-self.frequencies * np.sin(phase)) @ self.cos_coeffs
                + (self.frequencies * np.cos(phase)) @ self.sin_coeffs)

    def to_document(self):
        return {'type': 'trig', 'center': self.center.tolist(),
                'cos': self.cos_coeffs.tolist(), 'sin': self.sin_coeffs.tolist()}


class ExpressionSegment(Segment):
    """Segment given by one expression in t per coordinate."""

    def __init__(self, coords: Sequence):
        self.exprs = [as_expr(c, ('t',)) for c in coords]
        self.derivatives = [expr.diff('t') for expr in self.exprs]
        self._position = compile_array(self.exprs, {'t': 0})
        self._velocity = compile_array(self.derivatives, {'t': 0})

    def _evaluate(self, function, t):
        values = function(np.array([t], dtype=float))
        if not np.all(np.isfinite(values)):
            raise SpecError(f"curve expression is not finite at t={t}")
        return values

    def position(self, t):
        return self._evaluate(self._position, t)

    def velocity(self, t):
        return self._evaluate(self._velocity, t)

    def to_document(self):
        return {'type': 'expr', 'coords': [str(expr) for expr in self.exprs]}


class ReversedSegment(Segment):
    def __init__(self, inner: Segment):
        self.inner = inner

    def position(self, t):
        return self.inner.position(1.0 - t)

    def velocity(self, t):
        return -self.inner.velocity(1.0 - t)

    def reversed(self):
        return self.inner

    def to_document(self):
        return {'type': 'reversed', 'segment': self.inner.to_document()}


class CurvePath:
    """
    Ordered segments with a shared step count.

    Args:
        segments: Consecutive segments whose endpoints coincide
        steps_per_segment: Integration steps used on each segment
        is_loop: Whether the curve must close up
    """

    def __init__(self, segments: List[Segment], steps_per_segment: int = DEFAULT_STEPS, is_loop: bool = False):
        if not segments:
            raise SpecError("a curve needs at least one segment")
        self.segments = list(segments)
        self.steps_per_segment = int(steps_per_segment)
        self.is_loop = bool(is_loop)
        for index, (first, second) in enumerate(zip(self.segments, self.segments[1:])):
            gap = np.max(np.abs(first.end - second.start))
            if gap > JOIN_TOLERANCE:
                raise SpecError(f"segments {index} and {index + 1} do not meet (gap {gap:.3e})")
        if self.is_loop:
            gap = np.max(np.abs(self.end - self.start))
            if gap > JOIN_TOLERANCE:
                raise SpecError(f"loop does not close (gap {gap:.3e})")

    @property
    def start(self) -> np.ndarray:
        return self.segments[0].start

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1].end

    @property
    def dim(self) -> int:
        return self.start.shape[0]

    def reversed(self) -> 'CurvePath':
        return CurvePath([segment.reversed() for segment in reversed(self.segments)],
                         self.steps_per_segment, self.is_loop)

    def then(self, other: 'CurvePath') -> 'CurvePath':
        """Concatenation: follow this curve, then the other one."""
        closed = bool(np.max(np.abs(other.end - self.start)) <= JOIN_TOLERANCE)
        return CurvePath(self.segments + other.segments, self.steps_per_segment, closed)

    def sample(self, per_segment: int = 64) -> np.ndarray:
        ts = np.linspace(0.0, 1.0, per_segment + 1)
        return np.array([segment.position(t) for segment in self.segments for t in ts])

    def to_document(self) -> Dict:
        return {
            'segments': [segment.to_document() for segment in self.segments],
            'steps': self.steps_per_segment,
            'loop': self.is_loop,
        }

    @classmethod
    def polyline(cls, points: Sequence[Sequence[float]], steps: int = DEFAULT_STEPS, closed: bool = False) -> 'CurvePath':
        points = [np.asarray(p, dtype=float) for p in points]
        if closed:
            points = points + [points[0]]
        if len(points) < 2:
            raise SpecError("a polyline needs at least two points")
        segments = [LinearSegment(a, b) for a, b in zip(points, points[1:])]
        return cls(segments, steps, closed)

    @classmethod
    def constant(cls, point: Sequence[float], steps: int = DEFAULT_STEPS) -> 'CurvePath':
        return cls([LinearSegment(point, point)], steps, True)

    @classmethod
    def rectangle(cls, base: Sequence[float], i: int, j: int, delta: float, steps: int = DEFAULT_STEPS) -> 'CurvePath':
        """Coordinate square of side delta in the (i, j) plane: first along i, then along j."""
        base = np.asarray(base, dtype=float)
        e_i = np.zeros_like(base)
        e_j = np.zeros_like(base)
        e_i[i] = delta
        e_j[j] = delta
        return cls.polyline([base, base + e_i, base + e_i + e_j, base + e_j], steps, closed=True)

    @classmethod
    def trig_loop(cls, center: Sequence[float], cos_coeffs: np.ndarray, sin_coeffs: np.ndarray,
                  steps: int = DEFAULT_STEPS) -> 'CurvePath':
        return cls([TrigSegment(center, cos_coeffs, sin_coeffs)], steps, True)

    @classmethod
    def from_document(cls, document: Dict, steps: Optional[int] = None) -> 'CurvePath':
        """
        Build a curve from its JSON form.

        Args:
            document: {"segments": [...], "steps": int, "loop": bool}
            steps: Overrides the step count stored in the document

        Returns:
            The curve
        """
        segments = []
        for item in document['segments']:
            segments.extend(_segments_from_document(item))
        count = steps if steps is not None else document.get('steps', DEFAULT_STEPS)
        return cls(segments, count, document.get('loop', False))


def _segments_from_document(item: Dict) -> List[Segment]:
    kind = item.get('type')
    if kind == 'polyline':
        points = [np.asarray(p, dtype=float) for p in item['points']]
        if len(points) < 2:
            raise SpecError("a polyline needs at least two points")
        return [LinearSegment(a, b) for a, b in zip(points, points[1:])]
    if kind == 'expr':
        return [ExpressionSegment(item['coords'])]
    if kind == 'trig':
        return [TrigSegment(item['center'], np.array(item['cos']), np.array(item['sin']))]
    if kind == 'reversed':
        return [segment.reversed() for segment in reversed(_segments_from_document(item['segment']))]
    raise SpecError(f"unknown segment type {kind!r}")
