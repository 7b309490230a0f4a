class OpinionFitError(Exception):
    """Base class for all package errors."""


class DataError(OpinionFitError, ValueError):
    """Malformed, inconsistent or insufficient opinion-score data."""


class DimensionError(DataError):
    """Parameter vector lengths do not match the score tensor."""


class NumericalError(OpinionFitError, ArithmeticError):
    """A computation hit a degenerate numerical configuration."""


class DegenerateVarianceError(NumericalError):
    """A voting subject has zero or negative inconsistency."""
