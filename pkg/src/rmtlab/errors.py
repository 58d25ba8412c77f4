"""Exception types shared across the laboratory."""


class RmtError(Exception):
    """Base class for all rmtlab errors."""


class InvalidDimensionError(RmtError, ValueError):
    """Matrix dimension is not a positive integer."""


class RecipeError(RmtError, ValueError):
    """An H0 recipe is inconsistent with the requested dimension."""


class PoleError(RmtError, ValueError):
    """Evaluation requested exactly at an atom of the measure."""


class GeometryError(RmtError, ValueError):
    """Quadrature geometry violates the contour/line constraints."""


class OutOfBulkError(RmtError, ValueError):
    """Requested reference point has zero local density."""


class InsufficientDataError(RmtError, ValueError):
    """Not enough Monte Carlo samples for the requested statistic."""


class DegeneracyError(RmtError, ValueError):
    """Super-diagonalization requires distinct diagonal entries."""


class BudgetExceededError(RmtError, ValueError):
    """Symbolic expansion would exceed the configured term budget."""


class NumericalFailureError(RmtError, RuntimeError):
    """A numerical routine failed to meet its accuracy contract."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context


class SolverFailureError(NumericalFailureError):
    """Root finder did not converge within its iteration budget."""


class ConditioningError(NumericalFailureError):
    """Inputs are too ill-conditioned for the selected method."""


class EvaluationError(NumericalFailureError):
    """Kernel evaluation overflowed or lost all significant digits."""
