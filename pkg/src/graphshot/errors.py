"""Shared exception types."""


class GraphshotError(Exception):
    """Base class for all graphshot errors."""


class ValidationError(GraphshotError, ValueError):
    """An input violates a documented invariant or precondition."""


class FeatureFileError(GraphshotError, OSError):
    """A feature file is missing, truncated, or not in the declared format."""


class ConvergenceError(GraphshotError, RuntimeError):
    """An iterative solver exhausted its iteration budget.

    Carries the best residual reached so callers can report how far off the
    solve ended up.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class EvaluationError(GraphshotError, RuntimeError):
    """An episode failed during an evaluation run; message carries the run index."""
