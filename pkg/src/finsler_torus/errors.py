"""Exception hierarchy shared by all modules."""


class FinslerError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(FinslerError, ValueError):
    """An input violates a documented precondition."""


class SingularityError(FinslerError, ArithmeticError):
    """A quantity is undefined at the requested point (zero vector, flat tensor)."""


class NumericalFailure(FinslerError, RuntimeError):
    """An iterative routine did not converge or produced non-finite values."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigurationError(FinslerError, RuntimeError):
    """The pipeline parameters cannot produce a valid construction."""


class InvalidState(FinslerError, RuntimeError):
    """An object is asked for something its current state cannot deliver."""
