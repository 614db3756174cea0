"""Exception types shared across the package."""


class ToeplikError(Exception):
    """Base class for all package-specific errors."""


class ParameterDomainError(ToeplikError, ValueError):
    """Parameter vector outside the model's validity box."""


class FrequencyDomainError(ToeplikError, ValueError):
    """Frequency argument outside [-1/2, 1/2], or a nonpositive spectral value
    where a positive one is required."""


class CapabilityError(ToeplikError, ValueError):
    """Requested derivative order (or similar capability) not supplied by the model."""


class UsageError(ToeplikError, ValueError):
    """API misuse, e.g. a two-sided derivative requested at a rough point."""


class ModelValidityError(ToeplikError, ValueError):
    """Model produced NaN or negative spectral values during integration."""


class IntegrationError(ToeplikError, RuntimeError):
    """Adaptive quadrature failed to converge within the panel budget.

    Attributes
    ----------
    worst_interval : tuple of float, or None
        Endpoints of the subinterval with the largest error estimate.
    """

    def __init__(self, message, worst_interval=None):
        super().__init__(message)
        self.worst_interval = worst_interval


class ResidualToleranceError(ToeplikError, ArithmeticError):
    """A quantity that must be real/symmetric up to rounding exceeded its
    asserted residual tolerance (imaginary part, asymmetry, ...)."""


class IndefinitenessError(ToeplikError, ArithmeticError):
    """A matrix that must be positive definite is numerically indefinite
    (singular capacitance, nonpositive determinant, ...). Usually signals
    that the correction rank is too small or the model invalid."""


class MatrixNotPDError(IndefinitenessError):
    """Cholesky factorization failed."""


class EmbeddingFailureError(ToeplikError, ArithmeticError):
    """Circulant embedding spectrum has a significantly negative entry."""
