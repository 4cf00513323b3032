"""Exception and warning types raised across the package."""


class CurveMetricsError(Exception):
    """Base class for all errors raised by curvemetrics."""


class CurveError(CurveMetricsError, ValueError):
    """A curve or tangent field does not satisfy its shape/finiteness contract."""


class ImmersionError(CurveError):
    """A discrete curve has a vanishing edge or arc element."""


class ConfigError(CurveMetricsError, ValueError):
    """Invalid metric, experiment or run configuration."""


class GramError(CurveMetricsError, ArithmeticError):
    """The kernel Gram matrix could not be factorized.

    Attributes
    ----------
    pair : tuple of int or None
        Indices of the closest pair of points, the usual culprit.
    """

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class TrajectoryError(CurveMetricsError, RuntimeError):
    """Time integration broke down (blow-up, collapse or non-finite values)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SamplingError(CurveMetricsError, RuntimeError):
    """Ball sampling accepted too few candidate curves."""


class ConditioningWarning(RuntimeWarning):
    """A linear solve finished with a relative residual above 1e-10."""
