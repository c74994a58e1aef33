"""Exception types raised across the package."""


class RandMetricError(Exception):
    """Base class for all package errors."""


class NonZeroTrace(RandMetricError, ValueError):
    pass


class NotPositiveDefinite(RandMetricError, ValueError):
    pass


class NotUnimodular(RandMetricError, ValueError):
    pass


class DimensionTooSmall(RandMetricError, ValueError):
    pass


class BadParameter(RandMetricError, ValueError):
    pass


class GridTooCoarse(RandMetricError, ValueError):
    pass


class ShapeMismatch(RandMetricError, ValueError):
    pass


class EmptySchedule(RandMetricError, ValueError):
    pass


class DomainError(RandMetricError, ValueError):
    pass


class ConvergenceFailure(RandMetricError, RuntimeError):
    pass


class ConfigError(RandMetricError, ValueError):
    pass
