"""Fusion-based quantum computation: ZX diagrams, linear optics, flow and compilation."""

from .permanent import BACKEND, permanent

__version__ = "0.1.0"

__all__ = ["BACKEND", "permanent", "__version__"]
