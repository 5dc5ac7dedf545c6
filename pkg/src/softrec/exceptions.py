"""Exception types shared across the package."""


class SoftrecError(Exception):
    """Base class for all package errors."""


class ParameterError(SoftrecError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ValidationError(SoftrecError, ValueError):
    """An input object violates its structural invariants."""


class InvalidMeasureError(ValidationError):
    """A measure refers to atoms that do not exist."""


class InfeasibleError(SoftrecError):
    """A constraint set or parameter combination is empty.

    Parameters
    ----------
    message : str
        Human readable description.
    failed : str, optional
        Short tag naming the inequality that failed.
    floor : float, optional
        Best achievable value, when the failure is a resolution limit.
    """

    def __init__(self, message, failed=None, floor=None):
        super().__init__(message)
        self.failed = failed
        self.floor = floor


class NumericError(SoftrecError, ArithmeticError):
    """Non-finite input or a failed factorization."""


class ConfigError(SoftrecError, ValueError):
    """Experiment configuration is malformed or rejected."""
