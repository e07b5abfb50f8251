"""Weighted ball norms, Morrey-type norms, tail functional and cutoff profiles.

Suprema over the radius R are taken over the candidate set {r} plus every
cell edge above r. For piecewise-constant fields this is exact at cell edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Field, Params


@dataclass(frozen=True)
class MorreyReport:
    r: float
    value: float
    argmax_radius: float


def weighted_Lp_ball(field: Field, p: float, R: float | None = None) -> float:
    """(sum |u_i|^p m_i)^(1/p) over B_R, boundary cell weighted by its rho-mass inside B_R."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    grid = field.grid
    R = grid.R_max if R is None else R
    if R > grid.R_max * (1 + 1e-12):
        raise ValueError("R exceeds the grid radius")
    w = grid.fractional_masses(min(R, grid.R_max))
    return float(np.sum(np.abs(field.values) ** p * w)) ** (1.0 / p)


def _candidates(field: Field, r: float) -> np.ndarray:
    grid = field.grid
    if not r > 0:
        raise ValueError("r must be positive")
    if r > grid.R_max * (1 + 1e-12):
        raise ValueError(f"r = {r} exceeds R_max = {grid.R_max}")
    return np.concatenate([[r], grid.edges[grid.edges > r * (1 + 1e-12)]])


def ball_masses(field: Field, radii) -> np.ndarray:
    """Weighted L1 mass of |u| in B_R for each R."""
    grid = field.grid
    a = np.abs(field.values)
    cum = np.concatenate([[0.0], np.cumsum(a * grid.masses)])
    out = np.empty(len(radii))
    for k, R in enumerate(radii):
        j = int(np.searchsorted(grid.edges, R, side="right")) - 1
        if j >= grid.K or np.isclose(R, grid.edges[min(j, grid.K)], rtol=1e-13, atol=0):
            out[k] = cum[min(j, grid.K)]
        else:
            out[k] = cum[j] + a[j] * grid._shell_mass(grid.edges[j], R)
    return out


def morrey_1r(field: Field, params: Params, r: float) -> MorreyReport:
    """sup_{R >= r} R^-(N - gamma + (2 - gamma)/(m - 1)) * int_{B_R} |u| rho."""
    radii = _candidates(field, r)
    vals = radii ** (-params.mass_exponent) * ball_masses(field, radii)
    k = int(np.argmax(vals))
    return MorreyReport(r=r, value=float(vals[k]), argmax_radius=float(radii[k]))


def morrey_inf_r(field: Field, params: Params, r: float) -> MorreyReport:
    """sup_{R >= r} R^-((2 - gamma)/(m - 1)) * sup_{B_R} |u|."""
    radii = _candidates(field, r)
    grid = field.grid
    running = np.maximum.accumulate(np.abs(field.values))
    # cells meeting the open ball B_R are those with left edge < R
    n_cells = np.searchsorted(grid.edges[:-1], radii, side="left")
    sups = running[np.maximum(n_cells, 1) - 1]
    vals = radii ** (-params.growth_exponent) * sups
    k = int(np.argmax(vals))
    return MorreyReport(r=r, value=float(vals[k]), argmax_radius=float(radii[k]))


def ell_estimate(field: Field, params: Params, tail_fraction: float = 0.5) -> MorreyReport:
    """Finite-domain stand-in for lim_{r -> inf} ||u||_{1,r}: the norm at r = fraction * R_max.

    The limit itself is not computable on a bounded grid; the report is only
    meaningful when the field is representative of its far-field behaviour.
    """
    if not 0 < tail_fraction < 1:
        raise ValueError("tail fraction must lie in (0, 1)")
    grid = field.grid
    r = tail_fraction * grid.R_max
    if np.count_nonzero(grid.edges >= r) < 4:
        raise ValueError("tail window [fraction * R_max, R_max] holds fewer than 4 edges")
    return morrey_1r(field, params, r)


def phi_alpha_threshold(params: Params) -> float:
    return (2 - params.gamma) / (2 * (params.m - 1)) + (params.N - params.gamma) / 2


def l1_phi_alpha(field: Field, params: Params, alpha: float) -> float:
    """sum |u_i| (1 + c_i^2)^-alpha m_i."""
    if not alpha > phi_alpha_threshold(params):
        raise ValueError(
            f"alpha must exceed {phi_alpha_threshold(params):.6g} for the embedding to hold"
        )
    grid = field.grid
    phi = (1.0 + grid.centers**2) ** (-alpha)
    return float(np.sum(np.abs(field.values) * phi * grid.masses))


def existence_time(morrey_value: float, m: float, C1: float = 1.0) -> float:
    """C1 / value^(m - 1); infinite when the norm vanishes."""
    if morrey_value < 0:
        raise ValueError("norm value must be non-negative")
    if C1 <= 0:
        raise ValueError("calibration constant must be positive")
    if morrey_value == 0:
        return math.inf
    return C1 / morrey_value ** (m - 1)


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cutoff: 1 on B_R, 0 outside B_2R, quintic smoothstep in between."""

    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")

    def _s(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.R) / self.R, 0.0, 1.0)

    def __call__(self, r):
        s = self._s(r)
        return 1.0 - s**3 * (10 - 15 * s + 6 * s**2)

    def derivative(self, r):
        s = self._s(r)
        return -30 * s**2 * (1 - s) ** 2 / self.R

    def second_derivative(self, r):
        s = self._s(r)
        return -60 * s * (1 - s) * (1 - 2 * s) / self.R**2

    def laplacian(self, r, N: int):
        r = np.asarray(r, dtype=float)
        d1 = self.derivative(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(r > 0, (N - 1) * d1 / np.where(r > 0, r, 1.0), 0.0)
        return self.second_derivative(r) + radial


def cutoff_profile(R: float) -> CutoffProfile:
    return CutoffProfile(R)


def morrey_1r_cutoff(field: Field, params: Params, r: float) -> MorreyReport:
    """Equivalent norm sup_{R >= r} R^-(...) int phi_R |u| rho, over edges with 2R <= R_max."""
    grid = field.grid
    radii = _candidates(field, r)
    radii = radii[2 * radii <= grid.R_max * (1 + 1e-12)]
    if radii.size == 0:
        raise ValueError("need 2r <= R_max for the cutoff norm")
    a = np.abs(field.values) * grid.masses
    vals = np.array([R ** (-params.mass_exponent) * np.sum(CutoffProfile(R)(grid.centers) * a)
                     for R in radii])
    k = int(np.argmax(vals))
    return MorreyReport(r=r, value=float(vals[k]), argmax_radius=float(radii[k]))
