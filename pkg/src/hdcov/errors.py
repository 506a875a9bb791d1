"""Exception types shared across the library."""

__all__ = ["EstimationError", "FixedPointError", "IllConditionedError", "AllocationError"]


class EstimationError(Exception):
    """A covariance estimator could not produce a usable estimate."""


class FixedPointError(EstimationError):
    """A fixed-point iteration failed to converge within its iteration cap."""


class AllocationError(Exception):
    """A weight optimizer failed on the given covariance input."""


class IllConditionedError(AllocationError):
    """Covariance input too ill-conditioned to invert reliably."""
