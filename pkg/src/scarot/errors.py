"""Exception and warning types raised by scarot."""


class ScarotError(Exception):
    """Base class for all scarot errors."""


class NonOrthogonalInput(ScarotError, ValueError):
    pass


class NonPositiveEntry(ScarotError, ValueError):
    pass


class DimensionMismatch(ScarotError, ValueError):
    pass


class DimensionTooLarge(ScarotError, ValueError):
    pass


class UnsupportedDimension(ScarotError, ValueError):
    pass


class NotPositiveDefinite(ScarotError, ValueError):
    pass


class UnsupportedStratum(ScarotError, ValueError):
    """The input lies in a lower stratum that has no fiber search implementation."""


class OutsideInjectivityRadius(ScarotError, ValueError):
    pass


class EmptyInput(ScarotError, ValueError):
    pass


class BadParameter(ScarotError, ValueError):
    pass


class DatasetError(ScarotError, ValueError):
    """Malformed dataset file."""


class AntipodalRotationWarning(UserWarning):
    """A relative rotation is an involution, so the geodesic branch is not unique."""


class NoConvergenceWarning(UserWarning):
    pass
