"""Desk-scale numerics for Schatten-class spectral measure and resolvent
bounds of radial potentials, and eigenvalue sums of -Delta + V."""

from .errors import AccuracyFailure, DivergenceError, InvalidArgument, UnresolvedRegion
from .radial import (ExponentConfig, QuadratureRule, RadialProfile, dilate,
                     lorentz_norm, lq_norm, make_rule, standard_profiles)

__all__ = [
    "AccuracyFailure", "DivergenceError", "InvalidArgument", "UnresolvedRegion",
    "ExponentConfig", "QuadratureRule", "RadialProfile", "dilate",
    "lorentz_norm", "lq_norm", "make_rule", "standard_profiles",
]

__version__ = "0.1.0"
