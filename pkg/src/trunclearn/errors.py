"""Exception types shared across the package."""


class TruncLearnError(Exception):
    """Base class for package errors."""


class DomainError(TruncLearnError, ValueError):
    """An argument lies outside the function's domain."""


class DimensionError(TruncLearnError, ValueError):
    """Array shapes are inconsistent."""


class DataError(TruncLearnError):
    """Malformed or unusable input data."""


class NumericalError(TruncLearnError, ArithmeticError):
    """A solver produced non-finite values or hit a singular system."""
