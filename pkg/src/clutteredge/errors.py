"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``DataError`` -> 3,
``NumericError`` -> 4.
"""


class ClutterEdgeError(Exception):
    """Base class for all package errors."""


class ConfigError(ClutterEdgeError, ValueError):
    """Inconsistent or malformed run configuration."""


class DataError(ClutterEdgeError, ValueError):
    """Malformed input data (bad cube file, wrong shapes, non-finite values)."""


class NumericError(ClutterEdgeError, ArithmeticError):
    """A numerical routine hit a pathological input."""


class DegenerateDataError(NumericError):
    """Estimated noise power is not positive (all trailing eigenvalues vanish)."""
