"""Core application components."""

from .application import Application
from .exceptions import ConfigurationError, GradflowError, NumericalError

__all__ = ["Application", "GradflowError", "ConfigurationError", "NumericalError"]
