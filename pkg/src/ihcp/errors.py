"""Exception hierarchy shared by the solver modules."""


class IHCPError(Exception):
    """Base class for all errors raised by :mod:`ihcp`."""


class InvalidArgumentError(IHCPError, ValueError):
    """An argument violates a documented precondition."""


class SingularityError(IHCPError, ArithmeticError):
    """A linear system that must be solved is numerically singular."""


class CondensationError(SingularityError):
    """The virtual-DOF block of the conductance matrix cannot be inverted."""


class DegenerateSensingError(IHCPError, ArithmeticError):
    """The sensors cannot observe the flux regions (zero projection)."""


class StabilityError(IHCPError, ArithmeticError):
    """A stability precondition (spectral radius below one) is violated."""


class DivergenceError(IHCPError, ArithmeticError):
    """The sequential inverse recursion blew up.

    Attributes
    ----------
    step : int or None
        Index of the measurement step at which the state became non-finite
        or exceeded the divergence threshold.
    spectral_radius : float or None
        Spectral radius of the initial-error amplification matrix for the
        failing configuration, when it could be computed.
    """

    def __init__(self, message, step=None, spectral_radius=None):
        super().__init__(message)
        self.step = step
        self.spectral_radius = spectral_radius


class ConfigError(IHCPError, ValueError):
    """An experiment configuration file is malformed."""
