"""Exception types shared across the package."""


class ReflektError(Exception):
    """Base class for all library errors."""


class TruncationUnreliableError(ReflektError):
    """Spectral series too slowly convergent for the configured truncation.

    Raised when an evaluation time lies below the basis t_floor or when a
    score denominator falls below alpha/2, i.e. the truncated series can no
    longer be trusted.
    """


class ConfigurationError(ReflektError):
    """Inconsistent or out-of-range parameters."""


class EigensolverError(ReflektError):
    """1-D eigensolve failed; carries the axis index and residual."""

    def __init__(self, axis, residual, message=""):
        self.axis = axis
        self.residual = residual
        super().__init__(
            message or f"eigensolver failed on axis {axis} (residual {residual:.3e})"
        )


class IntegrityError(ReflektError):
    """Stored network metadata disagrees with recomputed values."""


class EnvelopeError(ReflektError):
    """Rejection-sampling envelope could not be estimated."""


class DependencyError(ReflektError):
    """A required upstream artifact is missing."""
