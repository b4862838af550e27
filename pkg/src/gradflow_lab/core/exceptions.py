"""Exception hierarchy for the laboratory.

Configuration problems derive from ``ValueError`` and numerical aborts from ``ArithmeticError`` so
callers that only know the builtin families still catch them.
"""

from typing import Any, Dict, Optional


class GradflowError(Exception):
    """Base class for every error raised by gradflow-lab."""


class ConfigurationError(GradflowError, ValueError):
    """Invalid parameters or incompatible configuration blocks."""


class DomainError(ConfigurationError):
    """Invalid domain description, or a point outside the domain."""


class NotStrictlyConvexError(ConfigurationError):
    """Anisotropy fails the sampled strict-convexity test."""


class ProfileRangeError(ConfigurationError):
    """A barrier profile does not cover the requested z-range or time span."""


class MissingConstantError(ConfigurationError):
    """A bound curve needs a constant that was not supplied."""


class NumericalError(GradflowError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class DegenerateCoefficientError(NumericalError):
    """Coefficient matrix has vanishing ellipticity along the gradient."""


class UnboundedDegeneracyError(NumericalError):
    """No positive floor for alpha(R) R^2 can be certified on the scan range."""


class ConvergenceError(NumericalError):
    """Iterative solver, optimizer or bracket search failed."""


class NonSmoothPointError(NumericalError):
    """Point lies on the cut locus of the distance function."""


class InstabilityError(NumericalError):
    """Explicit time step produced non-finite values."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateODEError(NumericalError):
    """Profile ODE integration stalled; carries the profile computed so far."""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial
