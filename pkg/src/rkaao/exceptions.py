"""Exception types raised across the package."""


class RkaaoError(Exception):
    """Base class for all package errors."""


class DimensionError(RkaaoError, ValueError):
    """Operands have incompatible shapes."""


class DomainError(RkaaoError, ValueError):
    """Input lies outside the domain an operation supports."""


class SingularityError(RkaaoError, ArithmeticError):
    """A matrix that must be invertible is (numerically) singular."""


class ConvergenceError(RkaaoError, RuntimeError):
    """An iterative kernel failed to converge within its sweep budget."""


class CapacityError(RkaaoError, MemoryError):
    """A problem exceeds the configured size cap."""


class ConfigError(RkaaoError, ValueError):
    """Invalid experiment configuration text."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
