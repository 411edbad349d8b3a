"""Exception hierarchy shared by all linboltz modules."""


class LinboltzError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LinboltzError):
    """Numeric input outside the admissible domain (negative density, ...)."""


class UsageError(LinboltzError):
    """API misuse: wrong shapes, empty grids, missing data."""


class ConfigError(LinboltzError):
    """Invalid run configuration (schema violation, CFL violation, ...)."""


class ConvergenceError(LinboltzError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CertificationError(LinboltzError):
    """An entropy-dissipation certificate exceeded its tolerance."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NumericalQualityError(LinboltzError):
    """A computed object violates a structural property beyond tolerance."""


class InfeasibleValueError(LinboltzError):
    """A quadrature sum touched the +inf sentinel of a convex cost."""
