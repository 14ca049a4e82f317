"""Exception hierarchy shared by all modules."""


class MultispinError(Exception):
    """Base class for library errors."""


class DomainError(MultispinError, ValueError):
    """An argument lies outside the region where the requested expansion converges."""


class PoleError(MultispinError, ArithmeticError):
    """A denominator factor of an elliptic gamma-function came too close to zero."""


class ZeroProximityError(MultispinError, ArithmeticError):
    """A theta function that appears in a denominator is numerically zero."""


class ConvergenceError(MultispinError, RuntimeError):
    """An iterative solver or a quadrature failed to reach its tolerance."""


class ConsistencyError(MultispinError, AssertionError):
    """Two independent evaluations of the same quantity disagree."""
