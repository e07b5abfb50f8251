"""Exact and semi-explicit solutions for the pure power weight rho = r^-gamma."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import Field, Params, RadialGrid, fv_laplacian, scaling_constants, sphere_area
from .potential import radial_poisson_dirichlet


class ConvergenceError(RuntimeError):
    pass


def barenblatt_c2(params: Params) -> float:
    lam = scaling_constants(params).lam
    g = params.gamma
    return lam * (params.m - 1) / (params.m * (2 - g) * (params.N - g))


@dataclass(frozen=True)
class BarenblattParams:
    """Weighted Barenblatt solution with height parameter ``c1``."""

    params: Params
    c1: float

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")

    @property
    def c2(self) -> float:
        return barenblatt_c2(self.params)

    def support_radius(self, t: float) -> float:
        p = self.params
        lam = scaling_constants(p).lam
        return (self.c1 / self.c2) ** (1 / (2 - p.gamma)) * t ** (lam / (p.N - p.gamma))

    @property
    def mass(self) -> float:
        return barenblatt_mass(self, 1.0)

    @classmethod
    def from_mass(cls, params: Params, M: float) -> "BarenblattParams":
        # mass scales like c1^(1/(m-1) + (N-gamma)/(2-gamma))
        unit = barenblatt_mass(cls(params, 1.0), 1.0)
        expo = 1 / (params.m - 1) + (params.N - params.gamma) / (2 - params.gamma)
        return cls(params, (M / unit) ** (1 / expo))

    @classmethod
    def from_support(cls, params: Params, radius: float, t: float = 1.0) -> "BarenblattParams":
        """Height parameter whose support at time t has the given radius."""
        lam = scaling_constants(params).lam
        c2 = barenblatt_c2(params)
        scale = radius / t ** (lam / (params.N - params.gamma))
        return cls(params, c2 * scale ** (2 - params.gamma))


def barenblatt_eval(r, t, bp: BarenblattParams):
    """t^-lambda (c1 - c2 t^-(theta lambda) r^(2-gamma))_+^(1/(m-1))."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("Barenblatt solution needs t > 0")
    p = bp.params
    sc = scaling_constants(p)
    r = np.asarray(r, dtype=float)
    core = bp.c1 - bp.c2 * t ** (-sc.theta * sc.lam) * np.abs(r) ** (2 - p.gamma)
    return t ** (-sc.lam) * np.maximum(core, 0.0) ** (1 / (p.m - 1))


def barenblatt_mass(bp: BarenblattParams, t: float) -> float:
    """rho-weighted mass by adaptive quadrature."""
    p = bp.params
    rs = bp.support_radius(t)
    val, _ = integrate.quad(
        lambda r: float(barenblatt_eval(r, t, bp)) * r ** (p.N - 1 - p.gamma),
        0.0, rs, limit=200, epsabs=0, epsrel=1e-13,
    )
    return sphere_area(p.N) * val


def wpme_residual(u, params: Params, samples, h: float) -> np.ndarray:
    """Pointwise r^-gamma u_t - Lap(u^m) by centred differences of step h.

    ``u(r, t)`` is any vectorised callable; ``samples`` is an (n, 2) array of
    (r, t) pairs with r > h.
    """
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    r, t = s[:, 0], s[:, 1]
    if np.any(r <= h):
        raise ValueError("samples need r > h")
    N, m = params.N, params.m
    ut = (u(r, t + h) - u(r, t - h)) / (2 * h)
    pp, p0, pm = u(r + h, t) ** m, u(r, t) ** m, u(r - h, t) ** m
    lap = (pp - 2 * p0 + pm) / h**2 + (N - 1) / r * (pp - pm) / (2 * h)
    return r ** (-params.gamma) * ut - lap


def barenblatt_residual(bp: BarenblattParams, samples, h: float = 1e-3) -> float:
    """max |rho u_t - Lap(u^m)| over interior samples of the Barenblatt solution."""
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    for r, t in s:
        if t - h <= 0:
            raise ValueError("samples need t > h")
        rs = min(bp.support_radius(t - h), bp.support_radius(t + h))
        if r + h >= rs:
            raise ValueError(f"sample r = {r} touches the free boundary at t = {t}")
    res = wpme_residual(lambda r, t: barenblatt_eval(r, t, bp), bp.params, s, h)
    return float(np.max(np.abs(res)))


def blowup_kappa(params: Params) -> float:
    """Coefficient making kappa r^((2-gamma)/(m-1)) (T-t)^(-1/(m-1)) an exact solution."""
    m, g, N = params.m, params.gamma, params.N
    k_pow = (m - 1) / (m * (2 - g) * (m * (2 - g) + (N - 2) * (m - 1)))
    return k_pow ** (1 / (m - 1))


@dataclass(frozen=True)
class BlowupParams:
    params: Params
    T: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("blow-up time must be positive")

    @property
    def kappa(self) -> float:
        return blowup_kappa(self.params)

    @property
    def initial_coefficient(self) -> float:
        """kappa T^(-1/(m-1)), the coefficient of r^((2-gamma)/(m-1)) at t = 0."""
        return self.kappa * self.T ** (-1 / (self.params.m - 1))

    @classmethod
    def from_initial_coefficient(cls, params: Params, coeff: float) -> "BlowupParams":
        """Blow-up time (kappa*/coeff)^(m-1) of data coeff * r^((2-gamma)/(m-1))."""
        return cls(params, (blowup_kappa(params) / coeff) ** (params.m - 1))

    def boundary_pressure(self, R: float):
        """g(t) = u^m(R, t), infinite from t = T on."""
        def g(t):
            if t >= self.T:
                return math.inf
            return float(blowup_eval(R, t, self)) ** self.params.m
        return g


def blowup_eval(r, t, bp: BlowupParams):
    if np.any(np.asarray(t) >= bp.T):
        raise ValueError(f"solution has blown up at T = {bp.T}")
    p = bp.params
    r = np.asarray(r, dtype=float)
    return bp.kappa * np.abs(r) ** p.growth_exponent * (bp.T - np.asarray(t)) ** (-1 / (p.m - 1))


def blowup_residual(bp: BlowupParams, samples, h: float = 1e-3) -> float:
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    if np.any(s[:, 1] + h >= bp.T):
        raise ValueError("samples too close to the blow-up time")
    res = wpme_residual(lambda r, t: blowup_eval(r, t, bp), bp.params, s, h)
    return float(np.max(np.abs(res)))


@dataclass(frozen=True, eq=False)
class FriendlyGiantProfile:
    grid: RadialGrid
    params: Params
    W: np.ndarray
    residual: float
    relative_residual: float
    iterations: int
    clamped: bool

    def field(self, t: float) -> Field:
        """Separable solution W t^(-1/(m-1)) at time t."""
        return Field(self.grid, self.W * t ** (-1 / (self.params.m - 1)), t)


def friendly_giant_residual(grid: RadialGrid, params: Params, W) -> tuple[float, float]:
    """Absolute and relative max of -Lap(W^m) - rho W/(m-1) with W^m = 0 at R_max."""
    src = grid.density * W / (params.m - 1)
    res = -fv_laplacian(grid, W**params.m, 0.0) - src
    absres = float(np.max(np.abs(res)))
    return absres, absres / float(np.max(np.abs(src)))


def friendly_giant_solve(grid: RadialGrid, params: Params, tol: float = 1e-13,
                         max_iters: int = 500, start=None) -> FriendlyGiantProfile:
    """Fixed point v <- G[rho v^(1/m)] / (m-1) for v = W^m on B_{R_max}.

    The map is concave and homogeneous of degree 1/m, hence a contraction in
    Thompson's metric; any positive start converges.
    """
    m = params.m
    v = np.ones(grid.K) if start is None else np.array(start, dtype=float)
    if np.any(v <= 0):
        raise ValueError("start must be positive")
    clamped = False
    for it in range(1, max_iters + 1):
        new = radial_poisson_dirichlet(grid, grid.density * v ** (1 / m)) / (m - 1)
        if np.any(new < 0):
            clamped = True
            new = np.maximum(new, 0.0)
        change = np.max(np.abs(new - v)) / np.max(np.abs(new))
        v = new
        if change < tol:
            break
    else:
        raise ConvergenceError(f"friendly giant iteration stalled after {max_iters} steps")
    W = v ** (1 / m)
    res, rel = friendly_giant_residual(grid, params, W)
    return FriendlyGiantProfile(grid=grid, params=params, W=W, residual=res,
                                relative_residual=rel, iterations=it, clamped=clamped)


def dirac_approx(grid: RadialGrid, M: float, k: int = 1, t: float = 0.0) -> Field:
    """Mass M spread with constant value over the first k cells."""
    if k < 1 or k > grid.K:
        raise ValueError("k must be between 1 and the number of cells")
    if M < 0:
        raise ValueError("mass must be non-negative")
    u = np.zeros(grid.K)
    u[:k] = M / np.sum(grid.masses[:k])
    return Field(grid, u, t)


def blowup_field(grid: RadialGrid, bp: BlowupParams, t: float = 0.0, average: bool = False) -> Field:
    return Field.from_function(grid, lambda r: blowup_eval(r, t, bp), t, average=average)


def barenblatt_field(grid: RadialGrid, bp: BarenblattParams, t: float, average: bool = True) -> Field:
    return Field.from_function(grid, lambda r: barenblatt_eval(r, t, bp), t, average=average,
                               nodes=16)
