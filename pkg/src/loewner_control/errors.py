"""Exception hierarchy shared by all modules."""


class LoewnerError(Exception):
    """Base class for every error raised by this package."""


class DomainError(LoewnerError, ValueError):
    """Input outside the declared domain (point off the ball, bad dimension, ...)."""


class IntegrationError(LoewnerError, RuntimeError):
    """The ODE integrator could not meet its contract."""


class HorizonError(IntegrationError):
    """The infinite-horizon limit did not stabilize before the time cap."""


class SingularJacobianError(LoewnerError, ArithmeticError):
    """A Jacobian that should be invertible is numerically singular."""
