"""Exception types raised across the package."""


class VaetError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(VaetError):
    """Invalid, inconsistent, or unknown configuration input."""


class DomainError(VaetError):
    """Physical-parameter value outside its valid domain."""


class QuadratureError(VaetError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class DataError(VaetError):
    """Numerical output violates a structural invariant (norm, trace, shape)."""


class FitError(VaetError):
    """Rate extraction could not produce a meaningful fit."""


class EnsembleError(VaetError):
    """Trajectory ensemble failed (too many invalid paths, budget exceeded)."""
