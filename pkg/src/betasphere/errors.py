"""Exception types shared across the package."""


class BetasphereError(Exception):
    """Base class for all package errors."""


class InputError(BetasphereError, ValueError):
    """Invalid arguments or precondition failure (CLI exit code 2)."""


class SizeCapExceeded(InputError):
    """Exact transport instance is larger than the configured cap."""


class LipschitzViolation(InputError):
    """A test function supplied to the dual bound is not 1-Lipschitz."""

    def __init__(self, message, pair=None, excess=None):
        super().__init__(message)
        self.pair = pair
        self.excess = excess


class NumericalError(BetasphereError, ArithmeticError):
    """A numerical routine failed (CLI exit code 3)."""


class ConvergenceError(NumericalError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, last_residual=None, iterations=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations


class DegenerateConfigurationError(NumericalError):
    """Two points coincide or the section matrix is singular."""


class ConditionWarning(UserWarning):
    """Emitted when a configuration is close to degenerate."""
