"""Exception and warning types raised across qprob."""


class QprobError(Exception):
    """Base class for all qprob errors."""


class DimensionError(QprobError, ValueError):
    pass


class BoundaryLeak(QprobError):
    """A boundary term assumed to vanish does not.

    ``value`` carries whatever was computed before the check tripped, so
    callers can still report how far off the identity landed.
    """

    def __init__(self, message, value=None, leak=None):
        super().__init__(message)
        self.value = value
        self.leak = leak


class NotNormalized(QprobError, ValueError):
    pass


class AllMasked(QprobError):
    pass


class NodeEncountered(QprobError):
    pass


class DegenerateZero(QprobError):
    pass


class CFLViolation(QprobError):
    pass


class ConfigError(QprobError):
    pass


class CFLWarning(UserWarning):
    """Time step large relative to the operator scale (accuracy, not stability)."""


class BoundaryWarning(UserWarning):
    """Packet too close to a vanishing boundary during evolution."""
