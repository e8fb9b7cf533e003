"""Wiener-chaos prediction of fractional Brownian motion."""

from .errors import DomainError, NumericalError

__version__ = "0.1.0"

__all__ = ["DomainError", "NumericalError", "__version__"]
