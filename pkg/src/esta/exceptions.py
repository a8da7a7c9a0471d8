"""Exception hierarchy shared by all modules."""


class EstaError(Exception):
    """Base class for errors raised by this package."""


class DomainError(EstaError, ValueError):
    """An argument lies outside the domain of an operation."""


class AccuracyError(EstaError, ArithmeticError):
    """A numerical routine could not reach its accuracy target."""


class ConvergenceError(AccuracyError):
    """An iterative solver did not converge within its iteration budget."""


class GridError(AccuracyError):
    """A spatial grid is too coarse or too small for the wavefunction.

    ``space`` is ``"momentum"`` (spacing too coarse) or ``"position"`` (box
    too small).
    """

    def __init__(self, message, space="momentum"):
        super().__init__(message)
        self.space = space


class DegenerateGradientError(EstaError, ArithmeticError):
    """The estimated fidelity gradient vanishes, so no correction is defined."""


class UnsupportedOrderError(DomainError):
    """A perturbative order outside the implemented range was requested."""


class ConfigError(EstaError, ValueError):
    """A run configuration is malformed; the message names the offending key."""
