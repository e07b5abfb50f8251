"""Green's functions, radial Poisson solves, dual potentials and initial traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import (Params, RadialGrid, Trajectory, fv_laplacian, scaling_constants,
                   signed_power, sphere_area, unit_ball_volume)


def _green_constant(N: int) -> float:
    return 1.0 / (N * (N - 2) * unit_ball_volume(N))


def free_green(dist, N: int = 3):
    """Fundamental solution of -Laplace in R^N, |x - y|^(2-N) / (N (N-2) alpha(N))."""
    d = np.asarray(dist, dtype=float)
    if np.any(d <= 0):
        raise ValueError("Green's function is singular at zero distance")
    return _green_constant(N) * d ** (2 - N)


def green_n(dist, n: float, N: int = 3):
    """Smooth approximation (n^2 / (1 + n^2 d^2))^((N-2)/2) / (N (N-2) alpha(N))."""
    if n < 1:
        raise ValueError("approximation index must be >= 1")
    d = np.asarray(dist, dtype=float)
    return _green_constant(N) * (n**2 / (1.0 + (n * d) ** 2)) ** ((N - 2) / 2)


def green_n_laplacian(dist, n: float, N: int = 3):
    """Laplacian in x of the smoothed kernel: -n^N (1 + (n d)^2)^(-(N+2)/2) / alpha(N)."""
    if n < 1:
        raise ValueError("approximation index must be >= 1")
    d = np.asarray(dist, dtype=float)
    return -(n**N) * (1.0 + (n * d) ** 2) ** (-(N + 2) / 2) / unit_ball_volume(N)


def delta_recovery(f, n: float, N: int = 3, support: float = 1.0, domain: float | None = None):
    """int_{R^N} Lap G_n(x, 0) f(|x|) dx for radial ``f`` vanishing beyond ``support``."""
    domain = support if domain is None else domain
    if support > domain:
        raise ValueError("profile support exceeds the quadrature domain")
    omega = sphere_area(N)

    def integrand(r):
        return green_n_laplacian(r, n, N) * f(r) * r ** (N - 1)

    # the kernel lives on the scale 1/n; split there so quad resolves it
    pts = [p for p in (0.5 / n, 2.0 / n, 8.0 / n, 32.0 / n) if p < support]
    bounds = [0.0, *pts, support]
    total = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        val, _ = integrate.quad(integrand, a, b, limit=200, epsabs=1e-14, epsrel=1e-12)
        total += val
    return omega * total


def radial_poisson_dirichlet(grid: RadialGrid, rhs) -> np.ndarray:
    """Cell values w with -Lap w = rhs, w'(0) = 0 and w(R_max) = 0.

    Uses the same two-point face fluxes as the solver, so applying
    :func:`wpme.core.fv_laplacian` with outer value 0 returns ``rhs``.
    """
    rhs = np.asarray(rhs, dtype=float)
    # flux through face j+1/2 balances the source enclosed by it
    enclosed = np.cumsum(rhs * grid.volumes)
    w = np.empty(grid.K)
    w[-1] = enclosed[-1] / grid.outer_transmissibility
    steps = enclosed[:-1] / grid.transmissibilities
    w[:-1] = w[-1] + np.cumsum(steps[::-1])[::-1]
    return w


def radial_poisson_free(grid: RadialGrid, rhs, at=None) -> np.ndarray:
    """Newtonian potential of a piecewise-constant radial density.

    w(r) = [r^(2-N) int_0^r s^(N-1) f ds + int_r^inf s f ds] / (N - 2),
    integrated exactly cell by cell and evaluated at ``at`` (default: centres).
    """
    rhs = np.asarray(rhs, dtype=float)
    N = grid.N
    e = grid.edges
    r = grid.centers if at is None else np.atleast_1d(np.asarray(at, dtype=float))
    if np.any(r <= 0):
        raise ValueError("evaluation radii must be positive")
    inner_cells = rhs * np.diff(e**N) / N
    outer_cells = rhs * np.diff(e**2) / 2
    cum_in = np.concatenate([[0.0], np.cumsum(inner_cells)])
    tail_out = np.concatenate([np.cumsum(outer_cells[::-1])[::-1], [0.0]])
    j = np.clip(np.searchsorted(e, r, side="right") - 1, 0, grid.K)
    out = np.empty(r.size)
    for k, (rk, jk) in enumerate(zip(r, j)):
        if jk >= grid.K:
            inner, outer = cum_in[-1], 0.0
        else:
            inner = cum_in[jk] + rhs[jk] * (rk**N - e[jk] ** N) / N
            outer = tail_out[jk + 1] + rhs[jk] * (e[jk + 1] ** 2 - rk**2) / 2
        out[k] = (rk ** (2 - N) * inner + outer) / (N - 2)
    return out


def discrete_free_potential(grid: RadialGrid, rhs) -> np.ndarray:
    """Whole-space potential built from the solver's face fluxes.

    Inside B_{R_max} the cell values invert :func:`wpme.core.fv_laplacian`
    exactly; the value at R_max is the far field M / ((N-2) omega R^(N-2)) of
    the enclosed source, so for zero net source it coincides with the
    Dirichlet potential.
    """
    rhs = np.asarray(rhs, dtype=float)
    enclosed = np.cumsum(rhs * grid.volumes)
    N = grid.N
    boundary = enclosed[-1] / ((N - 2) * sphere_area(N) * grid.R_max ** (N - 2))
    return boundary + radial_poisson_dirichlet(grid, rhs)


@dataclass(frozen=True, eq=False)
class DualField:
    """W = w - h with -Lap W = u rho and W_t = -u^m.

    ``w`` is the Dirichlet potential of u rho on B_{R_max}; ``h`` the boundary
    correction, which is a constant in the radial setting.
    """

    grid: RadialGrid
    t: float
    w: np.ndarray
    h: float
    poisson_residual: float

    @property
    def W(self) -> np.ndarray:
        return self.w - self.h


def dual_field(trajectory: Trajectory, index: int, params: Params) -> DualField:
    """Dual potential of snapshot ``index``.

    h is accumulated from the trajectory's boundary-pressure ledger, starting
    from zero at the first snapshot (a time shift, harmless for W_t).
    """
    if trajectory.pressure_ledger.size != len(trajectory) - 1:
        raise ValueError("trajectory lacks a boundary pressure history")
    snap = trajectory[index]
    grid = snap.grid
    rhs = snap.values * grid.density
    w = radial_poisson_dirichlet(grid, rhs)
    h = float(np.sum(trajectory.pressure_ledger[:index]))
    res = np.max(np.abs(-fv_laplacian(grid, w, 0.0) - rhs)) if grid.K else 0.0
    return DualField(grid=grid, t=snap.t, w=w, h=h, poisson_residual=float(res))


@dataclass(frozen=True)
class DualReport:
    max_increase: float
    time_residual: float
    poisson_residual: float
    monotone: bool


def dual_consistency(trajectory: Trajectory, params: Params, tol: float = 1e-8) -> DualReport:
    """W must not increase between snapshots and (W2 - W1)/dt must match -u^m at midpoints."""
    duals = [dual_field(trajectory, k, params) for k in range(len(trajectory))]
    worst_inc, worst_res = 0.0, 0.0
    scale = max(np.max(np.abs(d.W)) for d in duals) or 1.0
    for k in range(len(duals) - 1):
        d1, d2 = duals[k], duals[k + 1]
        worst_inc = max(worst_inc, float(np.max(d2.W - d1.W)) / scale)
        dt = d2.t - d1.t
        mid = 0.5 * (signed_power(trajectory[k].values, params.m)
                     + signed_power(trajectory[k + 1].values, params.m))
        worst_res = max(worst_res, float(np.max(np.abs((d2.W - d1.W) / dt + mid))))
    return DualReport(
        max_increase=worst_inc,
        time_residual=worst_res,
        poisson_residual=max(d.poisson_residual for d in duals),
        monotone=worst_inc <= tol,
    )


@dataclass(frozen=True)
class FLBReport:
    t0: float
    t1: float
    probe_radius: float
    lhs: float
    rhs: float
    passed: bool

    @property
    def margin(self) -> float:
        """(rhs - lhs) / |rhs|; >= -1e-8 passes."""
        return (self.rhs - self.lhs) / abs(self.rhs) if self.rhs else -self.lhs


def flb_check(trajectory: Trajectory, i0: int, i1: int, probe_cell: int, params: Params,
              rel_tol: float = 1e-8, roundoff: float = 1e-14, origin: float = 0.0) -> FLBReport:
    """Compare int [u(t0) - u(t1)] G(x, x0) rho dx with (m-1) t1^(m/(m-1)) t0^(-1/(m-1)) u^m(x0, t1).

    x0 is the centre of ``probe_cell``; for radial data the Green integral is
    the potential of the density evaluated at |x0|, taken here from the
    discrete Green operator of the scheme. Times are measured from
    ``origin``, the instant the run's initial trace is attained. Outside the
    support both sides vanish, so the left side is also allowed ``roundoff``
    times the potential of |u(t0)| rho at x0.
    """
    grid = trajectory.grid
    if not 0 <= probe_cell < grid.K:
        raise ValueError("probe outside grid")
    u0, u1 = trajectory[i0], trajectory[i1]
    t0, t1 = u0.t - origin, u1.t - origin
    if t0 > t1:
        raise ValueError("need t0 <= t1")
    if t0 <= 0:
        raise ValueError("t0 must lie after the origin")
    x0 = grid.centers[probe_cell]
    if i0 == i1:
        lhs = floor = 0.0
    else:
        lhs = float(discrete_free_potential(grid, (u0.values - u1.values) * grid.density)[probe_cell])
        floor = roundoff * float(discrete_free_potential(grid, np.abs(u0.values) * grid.density)[probe_cell])
    m = params.m
    rhs = (m - 1) * t1 ** (m / (m - 1)) * t0 ** (-1 / (m - 1)) * float(
        signed_power(u1.values[probe_cell], m))
    return FLBReport(t0=t0, t1=t1, probe_radius=float(x0), lhs=lhs, rhs=rhs,
                     passed=bool(lhs <= rhs + rel_tol * abs(rhs) + floor))


@dataclass(frozen=True)
class TraceReport:
    times: np.ndarray
    pairings: np.ndarray
    limit: float
    rate: float


def initial_trace(trajectory: Trajectory, phi, times, params: Params, support: float | None = None,
                  origin: float = 0.0) -> TraceReport:
    """Pairings int phi u(t_k) rho dx and their extrapolation to t -> origin.

    The limit is fitted as a + b (t - origin)^(theta lambda), the decay rate
    of the constructed solutions near the initial time.
    """
    grid = trajectory.grid
    if support is not None and support > grid.R_max:
        raise ValueError("test function support exceeds the grid")
    tt = trajectory.times
    times = np.asarray(times, dtype=float)
    idx = []
    for t in times:
        k = int(np.argmin(np.abs(tt - t)))
        if not np.isclose(tt[k], t, rtol=1e-9, atol=1e-12):
            raise ValueError(f"no snapshot at t = {t}")
        idx.append(k)
    weights = phi(grid.centers) * grid.masses
    pairings = np.array([float(np.dot(weights, trajectory[k].values)) for k in idx])
    sc = scaling_constants(params)
    rate = sc.theta * sc.lam
    if times.size >= 2:
        A = np.vstack([np.ones_like(times), (times - origin) ** rate]).T
        coef, *_ = np.linalg.lstsq(A, pairings, rcond=None)
        limit = float(coef[0])
    else:
        limit = float(pairings[0])
    return TraceReport(times=times, pairings=pairings, limit=limit, rate=rate)
