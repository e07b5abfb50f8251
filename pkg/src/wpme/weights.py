"""Radial weight models rho(r) and their envelope certificates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import sphere_area

_GAUSS_NODES = 16
_LOG_PANEL = 0.25


class WeightModel:
    """Common interface: ``rho(r)``, ``shell_mass(a, b, N)``, ``cell_masses(edges, N)``."""

    gamma: float = 0.0

    def __call__(self, r):
        raise NotImplementedError

    def shell_mass(self, a: float, b: float, N: int) -> float:
        raise NotImplementedError

    def cell_masses(self, edges, N: int) -> np.ndarray:
        edges = np.asarray(edges, dtype=float)
        return np.array([self.shell_mass(a, b, N) for a, b in zip(edges[:-1], edges[1:])])

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PurePower(WeightModel):
    """rho(r) = r^-gamma."""

    gamma: float = 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.gamma > 0 and np.any(r <= 0):
            raise ValueError("r^-gamma is singular at r = 0 for gamma > 0")
        if self.gamma == 0:
            return np.ones_like(r)
        return r ** (-self.gamma)

    def shell_mass(self, a, b, N):
        k = N - self.gamma
        return sphere_area(N) * (b**k - a**k) / k

    def cell_masses(self, edges, N):
        edges = np.asarray(edges, dtype=float)
        k = N - self.gamma
        return sphere_area(N) * np.diff(edges**k) / k

    def to_dict(self):
        return {"variant": "pure_power", "gamma": self.gamma}


@dataclass(frozen=True)
class PerturbedPower(WeightModel):
    """rho(r) = r^-gamma (1 + a sin(b ln r)), multiplier frozen below ``floor_radius``."""

    gamma: float = 0.0
    amplitude: float = 0.5
    frequency: float = 1.0
    floor_radius: float = 1e-6

    def __post_init__(self):
        if not -1 < self.amplitude < 1:
            raise ValueError("amplitude must lie in (-1, 1)")
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not self.floor_radius > 0:
            raise ValueError("floor radius must be positive")

    def multiplier(self, r):
        r = np.maximum(np.asarray(r, dtype=float), self.floor_radius)
        return 1.0 + self.amplitude * np.sin(self.frequency * np.log(r))

    def __call__(self, r):
        return PurePower(self.gamma)(r) * self.multiplier(r)

    def shell_mass(self, a, b, N):
        k = N - self.gamma
        omega = sphere_area(N)
        total = 0.0
        lo = self.floor_radius
        if a < lo:
            top = min(b, lo)
            total += omega * float(self.multiplier(lo)) * (top**k - a**k) / k
            a = top
        if b > a:
            total += omega * self._oscillating_part(a, b, k)
        return total

    def _oscillating_part(self, a, b, k):
        # s = tau^(1/k) makes the s^(k-1) factor disappear; panels are log-spaced in s
        n_panels = max(1, int(math.ceil(math.log(b / a) / _LOG_PANEL)))
        s_edges = a * (b / a) ** (np.arange(n_panels + 1) / n_panels)
        s_edges[-1] = b
        t_edges = s_edges**k
        x, w = np.polynomial.legendre.leggauss(_GAUSS_NODES)
        lo, hi = t_edges[:-1, None], t_edges[1:, None]
        tau = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
        vals = self.multiplier(tau ** (1.0 / k))
        return float(np.sum(0.5 * (hi - lo) * w[None, :] * vals)) / k

    def to_dict(self):
        return {
            "variant": "perturbed_power",
            "gamma": self.gamma,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "floor_radius": self.floor_radius,
        }


@dataclass(frozen=True, eq=False)
class Tabulated(WeightModel):
    """Piecewise-constant weight: ``values[j]`` on ``[radii[j], radii[j+1])``.

    Outside the table the nearest sample is used. ``gamma`` is the decay
    exponent the table is meant to satisfy and is only used for envelopes.
    """

    radii: np.ndarray
    values: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size == 0:
            raise ValueError("radii and values must be equal-length 1-d arrays")
        if np.any(np.diff(r) <= 0):
            raise ValueError("tabulated radii must increase strictly")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("tabulated values must be positive and finite")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)

    def __call__(self, r):
        idx = np.searchsorted(self.radii, np.asarray(r, dtype=float), side="right") - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]

    def shell_mass(self, a, b, N):
        inner = self.radii[(self.radii > a) & (self.radii < b)]
        pts = np.concatenate([[a], inner, [b]])
        vals = self(pts[:-1])
        return float(sphere_area(N) * np.sum(vals * np.diff(pts**N)) / N)

    def to_dict(self):
        return {
            "variant": "tabulated",
            "gamma": self.gamma,
            "radii": self.radii.tolist(),
            "values": self.values.tolist(),
        }


def eval_weight(model: WeightModel, r):
    return model(r)


def cell_mass(model: WeightModel, a: float, b: float, N: int) -> float:
    if not 0 <= a < b:
        raise ValueError("need 0 <= a < b")
    return model.shell_mass(a, b, N)


@dataclass(frozen=True)
class EnvelopeCertificate:
    passed: bool
    lower_margin: float
    upper_margin: float
    worst_lower_radius: float
    worst_upper_radius: float


def verify_envelope(model: WeightModel, c_under: float, c_over: float, radii,
                    gamma: float | None = None, rtol: float = 1e-12) -> EnvelopeCertificate:
    """Check c_under (1+r)^-gamma <= rho(r) <= c_over r^-gamma on sample radii.

    ``lower_margin`` is min rho (1+r)^gamma / c_under and ``upper_margin`` is
    max rho r^gamma / c_over; the certificate passes iff they are >= 1 and
    <= 1 respectively, up to ``rtol`` for rounding in r^-gamma r^gamma.
    """
    r = np.asarray(radii, dtype=float)
    if r.size == 0:
        raise ValueError("empty sample set")
    if np.any(r <= 0):
        raise ValueError("sample radii must be positive")
    g = model.gamma if gamma is None else gamma
    rho = model(r)
    low = rho * (1.0 + r) ** g / c_under
    up = rho * r**g / c_over
    i, j = int(np.argmin(low)), int(np.argmax(up))
    return EnvelopeCertificate(
        passed=bool(low[i] >= 1.0 - rtol and up[j] <= 1.0 + rtol),
        lower_margin=float(low[i]),
        upper_margin=float(up[j]),
        worst_lower_radius=float(r[i]),
        worst_upper_radius=float(r[j]),
    )


def load_tabulated_csv(path, gamma: float = 0.0) -> Tabulated:
    """Read a two-column ``radius,value`` CSV; a non-numeric header row is skipped."""
    radii, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            try:
                r, v = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue
                raise ValueError(f"{path}:{lineno}: expected two numeric columns")
            radii.append(r)
            values.append(v)
    return Tabulated(np.array(radii), np.array(values), gamma=gamma)


def weight_from_dict(spec: dict) -> WeightModel:
    kind = spec.get("variant", "pure_power")
    if kind == "pure_power":
        return PurePower(float(spec.get("gamma", 0.0)))
    if kind == "perturbed_power":
        return PerturbedPower(
            gamma=float(spec.get("gamma", 0.0)),
            amplitude=float(spec.get("amplitude", 0.5)),
            frequency=float(spec.get("frequency", 1.0)),
            floor_radius=float(spec.get("floor_radius", 1e-6)),
        )
    if kind == "tabulated":
        if "path" in spec:
            return load_tabulated_csv(spec["path"], gamma=float(spec.get("gamma", 0.0)))
        return Tabulated(np.array(spec["radii"]), np.array(spec["values"]),
                         gamma=float(spec.get("gamma", 0.0)))
    raise ValueError(f"unknown weight variant {kind!r}")
