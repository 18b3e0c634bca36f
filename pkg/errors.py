"""
Exception hierarchy shared by the RollHol modules.

Every error carries the process exit code the command-line front end maps it
to: 1 for bad input, 2 for a computation that finished but failed one of its
verification tolerances.
"""


class RollHolError(Exception):
    """Base class for all errors raised by the engine."""
    exit_code = 1


class SpecError(RollHolError):
    """Invalid manifold, curve or report input."""


class ExpressionError(SpecError):
    """Syntax or evaluation error in the scalar expression language."""

    def __init__(self, message: str, position: int = -1):
        super().__init__(message)
        self.position = position


class MetricError(SpecError):
    """Metric evaluation is not symmetric positive definite."""


class DomainError(RollHolError):
    """A point or a curve left the chart domain."""


class IntegrationError(RollHolError):
    """Fixed-step integration could not be carried out."""


class ClassificationError(RollHolError):
    """Inconsistent inputs handed to the holonomy classifier."""


class StructureError(RollHolError):
    """No invariant structure of the requested type exists, or it violates its identities."""
    exit_code = 2


class ToleranceError(RollHolError):
    """A verification residual exceeded its tolerance."""
    exit_code = 2
