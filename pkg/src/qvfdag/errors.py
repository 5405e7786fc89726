"""Exception types shared across the package."""


class QvfError(Exception):
    """Base class for qvfdag errors."""


class DomainError(QvfError, ValueError):
    """A natural parameter left its family's domain."""


class DegenerateOmega(QvfError, ArithmeticError):
    """``beta0 + beta1 * mean`` is numerically zero."""


class UnsupportedSampling(QvfError, NotImplementedError):
    """The family supports the omega transformation only."""


class NoCellsRetained(QvfError):
    """Every conditioning cell fell below the truncation threshold."""


class NonConvergence(QvfError, RuntimeWarning):
    """Coordinate descent hit its iteration cap."""
