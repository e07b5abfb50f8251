"""Problem parameters, scaling exponents, radial meshes and field snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

MIN_CELLS = 4


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / gamma_fn(N / 2.0)


def unit_ball_volume(N: int) -> float:
    return sphere_area(N) / N


@dataclass(frozen=True)
class Params:
    """Dimension, diffusion exponent, weight decay and weight envelope constants.

    The weight is assumed to satisfy
    ``c_under * (1 + r)**-gamma <= rho(r) <= c_over * r**-gamma``.
    """

    N: int = 3
    m: float = 2.0
    gamma: float = 0.0
    c_under: float = 0.5
    c_over: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValueError(f"dimension N must be an integer >= 3, got {self.N}")
        if not self.m > 1:
            raise ValueError(f"exponent m must be > 1, got {self.m}")
        if not 0 <= self.gamma < 2:
            raise ValueError(f"gamma must lie in [0, 2), got {self.gamma}")
        if not 0 < self.c_under < self.c_over:
            raise ValueError(
                f"envelope constants need 0 < c_under < c_over, got {self.c_under}, {self.c_over}"
            )

    @property
    def growth_exponent(self) -> float:
        """Spatial growth rate (2 - gamma)/(m - 1) of the scale-invariant profile."""
        return (2.0 - self.gamma) / (self.m - 1.0)

    @property
    def mass_exponent(self) -> float:
        """Exponent N - gamma + (2 - gamma)/(m - 1) of the Morrey normalisation."""
        return self.N - self.gamma + self.growth_exponent

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "m": self.m,
            "gamma": self.gamma,
            "c_under": self.c_under,
            "c_over": self.c_over,
        }


@dataclass(frozen=True)
class ScalingConstants:
    lam: float
    theta: float


def scaling_constants(params: Params) -> ScalingConstants:
    n_eff = params.N - params.gamma
    lam = n_eff / (n_eff * (params.m - 1.0) + 2.0 - params.gamma)
    theta = (2.0 - params.gamma) / n_eff
    return ScalingConstants(lam=lam, theta=theta)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Cell-centred mesh of the ball B_{R_max} in R^N.

    ``volumes`` are Lebesgue measures of the shells and ``masses`` their
    rho-measures. ``weight`` is kept so partial shells can be measured later.
    """

    edges: np.ndarray
    N: int
    volumes: np.ndarray
    masses: np.ndarray
    weight: object = None

    @property
    def K(self) -> int:
        return self.edges.size - 1

    @property
    def R_max(self) -> float:
        return float(self.edges[-1])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def density(self) -> np.ndarray:
        """Cell-averaged weight m_i / v_i."""
        return self.masses / self.volumes

    @property
    def face_areas(self) -> np.ndarray:
        """Areas of the K + 1 spheres r = edge_j (the first is 0)."""
        return sphere_area(self.N) * self.edges ** (self.N - 1)

    @property
    def transmissibilities(self) -> np.ndarray:
        """Face area over centre spacing for the K - 1 interior faces."""
        return self.face_areas[1:-1] / np.diff(self.centers)

    @property
    def outer_transmissibility(self) -> float:
        """Face area over the half-cell distance from the last centre to R_max."""
        return float(self.face_areas[-1] / (self.R_max - self.centers[-1]))

    def partial_mass(self, R: float) -> float:
        """rho-measure of B_R, R <= R_max."""
        return float(np.sum(self.fractional_masses(R)))

    def fractional_masses(self, R: float) -> np.ndarray:
        """rho-mass of each cell intersected with B_R."""
        if R < 0 or R > self.R_max * (1 + 1e-12):
            raise ValueError(f"radius {R} outside [0, {self.R_max}]")
        out = np.where(self.edges[1:] <= R, self.masses, 0.0)
        j = int(np.searchsorted(self.edges, R, side="right")) - 1
        if 0 <= j < self.K and self.edges[j] < R < self.edges[j + 1]:
            out[j] = self._shell_mass(self.edges[j], R)
        return out

    def _shell_mass(self, a: float, b: float) -> float:
        if self.weight is None:
            return sphere_area(self.N) * (b**self.N - a**self.N) / self.N
        return float(self.weight.shell_mass(a, b, self.N))


def make_grid(R_max: float, K: int, grading: str = "uniform", ratio: float | None = None,
              N: int = 3, weight=None) -> RadialGrid:
    """Build a radial mesh of B_{R_max}.

    ``grading`` is ``"uniform"`` or ``"geometric"``; in the latter case
    consecutive widths grow by ``ratio > 1``. ``weight`` is any object with a
    ``shell_mass(a, b, N)`` method (see :mod:`wpme.weights`); ``None`` means
    the Lebesgue measure.
    """
    if not R_max > 0:
        raise ValueError("R_max must be positive")
    if K < MIN_CELLS:
        raise ValueError(f"need at least {MIN_CELLS} cells, got {K}")
    if grading == "uniform":
        edges = np.linspace(0.0, R_max, K + 1)
    elif grading == "geometric":
        if ratio is None or not ratio > 1:
            raise ValueError(f"geometric grading needs ratio > 1, got {ratio}")
        w = ratio ** np.arange(K, dtype=float)
        edges = np.concatenate([[0.0], np.cumsum(w)])
        edges *= R_max / edges[-1]
        edges[-1] = R_max
    else:
        raise ValueError(f"unknown grading {grading!r}")
    return grid_from_edges(edges, N=N, weight=weight)


def grid_from_edges(edges: Sequence[float], N: int = 3, weight=None) -> RadialGrid:
    edges = np.asarray(edges, dtype=float)
    if edges[0] != 0.0 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must start at 0 and increase strictly")
    omega = sphere_area(N)
    volumes = omega * np.diff(edges**N) / N
    if weight is None:
        masses = volumes.copy()
    else:
        masses = np.asarray(weight.cell_masses(edges, N), dtype=float)
    if not (np.all(masses > 0) and np.all(np.isfinite(masses))):
        raise ValueError("weighted cell masses must be positive and finite")
    for arr in (edges, volumes, masses):
        arr.setflags(write=False)
    return RadialGrid(edges=edges, N=N, volumes=volumes, masses=masses, weight=weight)


@dataclass(frozen=True, eq=False)
class Field:
    """Values per cell of one radial grid at time ``t``."""

    grid: RadialGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.K,):
            raise ValueError(f"expected {self.grid.K} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.t < 0:
            raise ValueError("time stamp must be >= 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, t: float | None = None) -> "Field":
        return replace(self, values=values, t=self.t if t is None else t)

    def scaled(self, factor: float) -> "Field":
        return self.with_values(factor * self.values)

    @property
    def mass(self) -> float:
        return float(np.dot(self.grid.masses, self.values))

    @classmethod
    def from_function(cls, grid: RadialGrid, f, t: float = 0.0, average: bool = False,
                      nodes: int = 8) -> "Field":
        """Sample ``f`` at cell centres, or take rho-weighted cell averages."""
        if not average:
            return cls(grid, f(grid.centers), t)
        return cls(grid, cell_averages(grid, f, nodes=nodes), t)


def cell_averages(grid: RadialGrid, f, nodes: int = 8) -> np.ndarray:
    """rho-weighted averages of ``f`` over each shell by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = grid.edges[:-1, None], grid.edges[1:, None]
    s = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    jac = 0.5 * (b - a) * w[None, :]
    rho = np.ones_like(s) if grid.weight is None else grid.weight(s)
    integrand = f(s) * rho * s ** (grid.N - 1)
    num = np.sum(integrand * jac, axis=1)
    den = np.sum(rho * s ** (grid.N - 1) * jac, axis=1)
    return num / den


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of one run plus per-interval boundary ledgers.

    ``flux_ledger[k]`` is the rho-mass that entered through r = R_max between
    snapshots k and k + 1. ``pressure_ledger[k]`` is the time integral of the
    boundary pressure over the same interval. ``blowup_time`` is set when the
    step size collapsed before ``t_end``.
    """

    snapshots: tuple
    flux_ledger: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pressure_ledger: np.ndarray = field(default_factory=lambda: np.zeros(0))
    blowup_time: float | None = None
    steps: int = 0

    def __post_init__(self):
        times = np.array([s.t for s in self.snapshots])
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must increase strictly")
        fl = np.asarray(self.flux_ledger, dtype=float)
        pl = np.asarray(self.pressure_ledger, dtype=float)
        if fl.size != len(self.snapshots) - 1 or pl.size != fl.size:
            raise ValueError("ledgers need one entry per snapshot interval")
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        object.__setattr__(self, "flux_ledger", fl)
        object.__setattr__(self, "pressure_ledger", pl)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def grid(self) -> RadialGrid:
        return self.snapshots[0].grid

    @property
    def values(self) -> np.ndarray:
        """Array of shape (snapshots, cells)."""
        return np.vstack([s.values for s in self.snapshots])

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, k) -> Field:
        return self.snapshots[k]

    @property
    def final(self) -> Field:
        return self.snapshots[-1]


def signed_power(u, p: float):
    """Odd power |u|^(p-1) u."""
    u = np.asarray(u, dtype=float)
    return np.sign(u) * np.abs(u) ** p


def fv_divergence(grid: RadialGrid, p: np.ndarray, outer: float | None) -> tuple[np.ndarray, float]:
    """Net face flux into each cell for the radial Laplacian of ``p``.

    ``outer`` is the value of ``p`` prescribed at r = R_max, or ``None`` for
    a zero-flux outer face. Returns the per-cell net inflow and the flux
    through the outer face (positive inward).
    """
    flux = grid.transmissibilities * np.diff(p)
    net = np.zeros(grid.K)
    net[:-1] += flux
    net[1:] -= flux
    outer_flux = 0.0
    if outer is not None:
        outer_flux = grid.outer_transmissibility * (outer - p[-1])
        net[-1] += outer_flux
    return net, outer_flux


def fv_laplacian(grid: RadialGrid, p: np.ndarray, outer: float | None) -> np.ndarray:
    """Discrete radial Laplacian per unit volume."""
    net, _ = fv_divergence(grid, p, outer)
    return net / grid.volumes
