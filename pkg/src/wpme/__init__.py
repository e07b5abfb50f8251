"""Radial finite-volume solver and estimate checks for rho(x) u_t = Lap(u^m)."""

from .core import Field, Params, RadialGrid, Trajectory, make_grid, scaling_constants
from .solver import (HomogeneousDirichlet, PressureDirichlet, StepControl, ZeroFlux, evolve,
                     step)
from .weights import PerturbedPower, PurePower, Tabulated

__all__ = [
    "Field", "Params", "RadialGrid", "Trajectory", "make_grid", "scaling_constants",
    "HomogeneousDirichlet", "PressureDirichlet", "StepControl", "ZeroFlux", "evolve", "step",
    "PerturbedPower", "PurePower", "Tabulated",
]
