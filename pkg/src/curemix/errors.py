"""Exception types raised by curemix estimation and simulation code."""


class CureMixError(Exception):
    """Base class for all curemix errors.

    Errors escaping an EM fit carry the partial fit result (when one
    exists) in the ``partial`` attribute.
    """

    partial = None


class DataError(CureMixError):
    """Invalid input data: shape mismatch, bad value, or broken invariant."""


class SeparationError(CureMixError):
    """Quasi-separation in a logistic fit (a coefficient ran away)."""


class RankError(CureMixError):
    """Design matrix is rank deficient after standardization."""


class DegenerateRiskSetError(CureMixError):
    """All risk-set weights vanished at an event time in a weighted Cox fit."""


class InsufficientCuredError(CureMixError):
    """No known-cured subjects available to estimate the time-to-cure model.

    Callers may fall back to the crude-cure-probability or infinite-time
    strategies, which do not need the time-to-cure distribution.
    """


class NonConvergenceError(CureMixError):
    """An iterative solver hit its iteration cap before converging.

    Attributes
    ----------
    best : object or None
        Best iterate found (solver dependent: parameter vector or partial
        fit result).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CalibrationError(CureMixError):
    """Censoring-rate calibration could not reach the requested target."""


class OrderingError(CureMixError):
    """Requested stochastic ordering of survival curves does not hold."""


class BootstrapDegenerateError(CureMixError):
    """More than half of the bootstrap replicates failed to fit."""
