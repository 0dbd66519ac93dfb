"""Exception types raised by the toolkit."""


class WrongVariantError(ValueError):
    """A stepper was called with a sampler variant it does not integrate."""


class UndefinedCorrelationError(ValueError):
    """The autocorrelation ratio has a zero denominator."""


class InsufficientDataError(ValueError):
    """Not enough usable points to perform a fit or estimate."""


class ConvergenceError(RuntimeError):
    """An iterative reference calculation failed to converge.

    Attributes
    ----------
    history : list of float
        Successive estimates produced before giving up.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
