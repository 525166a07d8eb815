"""Exception types shared across the package."""


class MminetError(Exception):
    """Base class for all package errors."""


class DataError(MminetError, ValueError):
    """Malformed, missing or unusable input data."""


class NumericalError(MminetError, ArithmeticError):
    """A computation produced non-finite values."""
