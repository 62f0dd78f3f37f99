"""Numerical checks of the volume-ratio route to majorizing measures on hyperbolic space."""

from .hyperbolic import ModelSpace

__version__ = "0.1.0"
__all__ = ["ModelSpace", "__version__"]
