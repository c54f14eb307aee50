"""Exception hierarchy.

Everything raised on bad input derives from :class:`AggregationError` (itself a
``ValueError``) so callers such as the CLI can catch a single type.
"""


class AggregationError(ValueError):
    """Base class for input and configuration errors."""


class LossOutOfRange(AggregationError):
    pass


class RateOutOfRange(AggregationError):
    pass


class EmptyActiveSet(AggregationError):
    pass


class ConfigMismatch(AggregationError):
    pass


class DegenerateK(AggregationError):
    pass


class NegativeInput(AggregationError):
    pass


class AlphaOutOfRange(AggregationError):
    pass


class DeltaOutOfRange(AggregationError):
    pass


class DomainError(AggregationError):
    pass


class GradientBoundViolated(AggregationError):
    pass


class InvalidSpec(AggregationError):
    pass


class StaleRound(RuntimeError):
    """predict/update called out of order on a stateful wrapper."""
