"""Implicit Euler finite-volume integrator for rho u_t = Lap(u^m) on a radial mesh.

Unknowns are cell values u_i; the pressure p = |u|^(m-1) u lives at cell
centres and face fluxes are two-point differences of p. The face at r = 0
carries no flux. Each step solves

    m_i (u_i - u_i^old) = dt (F_{i+1/2} - F_{i-1/2})

with Newton's method on the tridiagonal Jacobian.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .core import Field, Params, Trajectory, fv_divergence, signed_power

log = logging.getLogger(__name__)

DERIVATIVE_FLOOR = 1e-14


class NewtonDiverged(RuntimeError):
    pass


class NonFiniteState(RuntimeError):
    pass


class StepSizeCollapse(RuntimeError):
    def __init__(self, t, trajectory):
        super().__init__(f"time step collapsed at t = {t}")
        self.t = t
        self.trajectory = trajectory


@dataclass(frozen=True)
class ZeroFlux:
    def pressure(self, t):
        return None


@dataclass(frozen=True)
class HomogeneousDirichlet:
    def pressure(self, t):
        return 0.0


@dataclass(frozen=True)
class PressureDirichlet:
    """Prescribes u^m = g(t) at r = R_max."""

    g: Callable[[float], float]

    def pressure(self, t):
        return float(self.g(t))


@dataclass(frozen=True)
class StepControl:
    dt0: float = 1e-3
    dt_min: float = 1e-9
    dt_max: float = math.inf
    dt_max_rel: float | None = None
    shrink: float = 0.5
    grow: float = 1.2
    newton_tol: float = 1e-11
    newton_max: int = 30
    nonnegative: bool = True

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt0:
            raise ValueError("need 0 < dt_min <= dt0")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.grow < 1:
            raise ValueError("grow factor must be >= 1")
        if self.newton_tol <= 0 or self.newton_max < 1:
            raise ValueError("bad Newton settings")

    @classmethod
    def fixed(cls, dt: float, **kw) -> "StepControl":
        """Constant step dt (no growth)."""
        return cls(dt0=dt, dt_min=min(kw.pop("dt_min", dt * 1e-6), dt), grow=1.0, dt_max=dt, **kw)


def _residual(u, u_old, dt, grid, m, g):
    p = signed_power(u, m)
    net, outer_flux = fv_divergence(grid, p, g)
    return grid.masses * (u - u_old) - dt * net, outer_flux


def _jacobian_bands(u, dt, grid, m):
    dp = np.maximum(m * np.abs(u) ** (m - 1), DERIVATIVE_FLOOR)
    T = grid.transmissibilities
    K = grid.K
    diag = grid.masses.copy()
    diag[:-1] += dt * T * dp[:-1]
    diag[1:] += dt * T * dp[1:]
    upper = -dt * T * dp[1:]
    lower = -dt * T * dp[:-1]
    ab = np.zeros((3, K))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return ab, dp


def _scaled(res, grid, scale):
    return float(np.max(np.abs(res) / grid.masses)) / scale


@dataclass(frozen=True)
class StepResult:
    field: Field
    outer_flux: float
    boundary_pressure: float
    iterations: int


def step_detailed(state: Field, dt: float, bc, control: StepControl, params: Params) -> StepResult:
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    m = params.m
    t_new = state.t + dt
    g = bc.pressure(t_new)
    if g is not None and not math.isfinite(g):
        raise NonFiniteState(f"boundary pressure not finite at t = {t_new}")
    u_old = state.values
    u = u_old.copy()
    if g is not None:
        u[-1] = max(u[-1], float(signed_power(g, 1.0 / m)))
    scale = max(np.max(np.abs(u_old)), np.max(np.abs(u)), 1e-300)
    res, flux = _residual(u, u_old, dt, grid, m, g)
    err = _scaled(res, grid, scale)
    polished = False
    for it in range(1, control.newton_max + 1):
        ab, dp = _jacobian_bands(u, dt, grid, m)
        if g is not None:
            ab[1, -1] += dt * grid.outer_transmissibility * dp[-1]
        delta = solve_banded((1, 1), ab, -res)
        if not np.all(np.isfinite(delta)):
            raise NonFiniteState("Newton update is not finite")
        alpha = 1.0
        while True:
            trial = u + alpha * delta
            if control.nonnegative:
                trial = np.maximum(trial, 0.0)
            t_res, t_flux = _residual(trial, u_old, dt, grid, m, g)
            t_err = _scaled(t_res, grid, scale)
            if np.isfinite(t_err) and (t_err < err or t_err < control.newton_tol):
                break
            alpha *= 0.5
            if alpha < 1.0 / 64:
                raise NewtonDiverged(f"line search failed at t = {t_new}, residual {err:.3e}")
        u, res, flux, err = trial, t_res, t_flux, t_err
        if err < control.newton_tol:
            if polished:
                break
            # one extra iteration drives the residual to round-off
            polished = True
    else:
        if err >= control.newton_tol:
            raise NewtonDiverged(f"no convergence in {control.newton_max} iterations at t = {t_new}")
    if not np.all(np.isfinite(u)):
        raise NonFiniteState("state is not finite")
    pb = float(signed_power(u[-1], m)) if g is None else float(g)
    return StepResult(field=state.with_values(u, t_new), outer_flux=float(flux),
                      boundary_pressure=pb, iterations=it)


def step(state: Field, dt: float, bc, control: StepControl, params: Params) -> Field:
    """One implicit Euler step; raises NewtonDiverged so callers can shrink dt."""
    return step_detailed(state, dt, bc, control, params).field


def evolve(state: Field, t_end: float, bc, control: StepControl, params: Params,
           schedule: Sequence[float] | None = None, report_blowup: bool = True) -> Trajectory:
    """Adaptive implicit Euler from ``state.t`` to ``t_end``.

    Snapshots are taken exactly at the ``schedule`` times (plus the initial
    state and ``t_end``). When the step size falls below ``dt_min`` the run
    stops; with ``report_blowup`` the trajectory up to the last good state is
    returned with ``blowup_time`` set, otherwise StepSizeCollapse is raised.
    """
    if not t_end > state.t:
        raise ValueError("t_end must exceed the initial time")
    targets = sorted({float(s) for s in ([] if schedule is None else schedule) if state.t < s < t_end} | {float(t_end)})
    snaps = [state]
    flux_ledger, pressure_ledger = [], []
    flux_acc = pres_acc = 0.0
    dt = control.dt0
    cur = state
    steps = 0
    blowup = None
    for target in targets:
        while cur.t < target:
            h = min(dt, control.dt_max, target - cur.t)
            if control.dt_max_rel is not None:
                h = min(h, max(control.dt_max_rel * cur.t, control.dt_min))
            tiny = target - (cur.t + h) < 1e-12 * max(1.0, abs(target))
            try:
                res = step_detailed(cur, h, bc, control, params)
            except (NewtonDiverged, NonFiniteState, FloatingPointError, ValueError) as exc:
                dt = h * control.shrink
                if dt < control.dt_min:
                    blowup = cur.t
                    log.info("step size collapsed at t=%.6g: %s", cur.t, exc)
                    break
                continue
            new = res.field
            if tiny:
                new = new.with_values(new.values, target)
            flux_acc += h * res.outer_flux
            pres_acc += h * res.boundary_pressure
            cur = new
            steps += 1
            if h >= min(dt, control.dt_max) * (1 - 1e-12):
                dt = min(h * control.grow, control.dt_max)
        if blowup is not None:
            if cur.t > snaps[-1].t:
                snaps.append(cur)
                flux_ledger.append(flux_acc)
                pressure_ledger.append(pres_acc)
            break
        snaps.append(cur)
        flux_ledger.append(flux_acc)
        pressure_ledger.append(pres_acc)
        flux_acc = pres_acc = 0.0
    traj = Trajectory(tuple(snaps), np.array(flux_ledger), np.array(pressure_ledger),
                      blowup_time=blowup, steps=steps)
    if blowup is not None and not report_blowup:
        raise StepSizeCollapse(blowup, traj)
    return traj


def discrete_mass(state: Field) -> float:
    return float(np.dot(state.grid.masses, state.values))


def l1_distance(a: Field, b: Field) -> float:
    return float(np.dot(a.grid.masses, np.abs(a.values - b.values)))
