"""Exception hierarchy shared by all modules."""


class BergmanLabError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(BergmanLabError, ValueError):
    """An argument is outside the documented domain."""


class SizingError(BergmanLabError):
    """A requested size exceeds a configured cap (nodes, degree, memory)."""


class EvaluationError(BergmanLabError, FloatingPointError):
    """A numerical evaluation produced non-finite values."""


class PositivityError(BergmanLabError):
    """A curvature or semi-positivity requirement failed.

    ``worst_point`` carries the offending chart point when known.
    """

    def __init__(self, message, worst_point=None, worst_value=None):
        super().__init__(message)
        self.worst_point = worst_point
        self.worst_value = worst_value


class FactorizationError(BergmanLabError):
    """A Gram or mass matrix failed to factor as positive definite."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class PrecisionEscalation(BergmanLabError):
    """Raised when double precision is insufficient and escalation is disabled."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class InconclusiveError(BergmanLabError):
    """A refinement ladder did not converge."""


class ConfigError(BergmanLabError):
    """Malformed or unresolvable experiment configuration."""
