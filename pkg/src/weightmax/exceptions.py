"""Exception hierarchy.

All errors derive from :class:`ValueError` so callers that only care about
"bad input" can catch a single type.
"""


class WeightMaxError(ValueError):
    """Base class for all errors raised by this package."""


class BoundsError(WeightMaxError):
    """An index or order lies outside the supported range."""


class ConfigurationError(WeightMaxError):
    """Invalid configuration (layer sizes, estimator options, trainer knobs)."""


class ShapeError(WeightMaxError):
    """Array dimensions do not agree."""


class DomainError(WeightMaxError):
    """An operation was applied where it is not defined."""


class CapacityError(WeightMaxError):
    """A network is too large for exact enumeration."""
