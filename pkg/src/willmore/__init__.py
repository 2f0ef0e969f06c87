"""Quaternionic Willmore surfaces: sphere congruences, Hopf fields, Backlund transforms."""

__version__ = "0.1.0"

from .calculus import GridChart, OneForm
from .mcs import SurfaceChart, analyze
from .quaternion import ProjPoint

__all__ = ["GridChart", "OneForm", "ProjPoint", "SurfaceChart", "analyze", "__version__"]
