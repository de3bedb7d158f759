"""Exception types raised by qreflect."""


class QReflectError(Exception):
    """Base class for all qreflect errors."""


class DomainError(QReflectError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(QReflectError, ArithmeticError):
    """A quadrature or integrator failed to reach the requested tolerance.

    Attributes
    ----------
    error_estimate : float or None
        The best error estimate achieved before giving up.
    """

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ConfigurationError(QReflectError):
    """A run configuration, catalog entry or solver setting is unusable."""


class FitError(QReflectError, ValueError):
    """Too few admissible points to fit the low-velocity law."""
