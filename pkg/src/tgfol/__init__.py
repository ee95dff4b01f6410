"""Totally geodesic foliations of Lorentzian 3-manifolds on explicit atlases."""

from .errors import TGFolError

__version__ = "0.1.0"
__all__ = ["TGFolError", "__version__"]
