"""Exception hierarchy shared by all modules."""


class RobustLrtError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(RobustLrtError, ValueError):
    """Invalid user-supplied parameter (grid, family, radius, ...)."""


class DomainError(RobustLrtError, ValueError):
    """Argument outside the mathematical domain of a function."""


class NumericError(RobustLrtError, ArithmeticError):
    """NaN or Inf where a finite number is required."""


class BracketError(RobustLrtError, ValueError):
    """A root bracket without a sign change."""


class EvaluationError(RobustLrtError, ValueError):
    """A callback returned a non-finite value at ``abscissa``."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class SolverError(RobustLrtError, RuntimeError):
    """Iterative solver failure; ``diagnostics`` holds the last state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleParameterError(SolverError):
    """Multipliers for which the parametric LFD is undefined at some grid point."""


class RangeError(RobustLrtError, ArithmeticError):
    """Supremum of a Legendre transform not attained inside the search range."""
