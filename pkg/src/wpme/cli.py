"""Command line entry point: ``wpme {solve,verify,suite,convergence} --config run.toml``.

Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 runtime failure.
The output directory comes from the config and can be overridden with the
``WPME_OUTPUT_DIR`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import harness as H
from .core import Field, Params, Trajectory, make_grid
from .oracle import (BarenblattParams, BlowupParams, barenblatt_field, blowup_field,
                     dirac_approx, friendly_giant_solve)
from .solver import (HomogeneousDirichlet, NewtonDiverged, NonFiniteState, PressureDirichlet,
                     StepControl, StepSizeCollapse, ZeroFlux, discrete_mass, evolve, l1_distance)
from .weights import PurePower, load_tabulated_csv, weight_from_dict

log = logging.getLogger("wpme")

OUTPUT_ENV = "WPME_OUTPUT_DIR"
CHECKS = ("global_smoothing", "local_smoothing", "ac", "ab", "contraction", "energy", "sobolev",
          "scaling", "existence_time", "flb")


class ConfigError(ValueError):
    pass


_REQUIRED = object()


def _get(block: dict, key: str, kind, default, where: str):
    if key not in block:
        if default is _REQUIRED:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    val = block[key]
    accepted = (int, float) if kind is float else kind
    # TOML booleans are ints to Python; keep them apart
    if isinstance(val, accepted) and isinstance(val, bool) == (kind is bool):
        return float(val) if kind is float else val
    raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {val!r}")


@dataclass
class RunConfig:
    raw: dict
    params: Params
    weight: dict
    R_max: float
    K: int
    grading: str
    ratio: float | None
    initial: dict
    bc: dict
    control: StepControl
    report_blowup: bool
    t_start: float
    t_end: float
    times: list[float]
    checks: dict = field(default_factory=dict)
    output_dir: Path = Path("wpme-out")
    seed: int = 0
    convergence: dict = field(default_factory=dict)

    @property
    def origin(self) -> float:
        return float(self.initial.get("origin", self.t_start if self.initial["kind"] in ("dirac", "csv")
                                      else 0.0))

    def weight_model(self):
        spec = {"variant": "pure_power", "gamma": self.params.gamma, **self.weight}
        return weight_from_dict(spec)

    def refined(self, factor: int = 2) -> "RunConfig":
        """Same run with factor times the cells and steps scaled by 1/factor."""
        c = self.control
        ctl = replace(c, dt0=c.dt0 / factor, dt_min=min(c.dt_min, c.dt0 / factor),
                      dt_max=c.dt_max / factor if math.isfinite(c.dt_max) else c.dt_max,
                      dt_max_rel=None if c.dt_max_rel is None else c.dt_max_rel / factor)
        return replace(self, K=self.K * factor, control=ctl)


def parse_config(raw: dict) -> RunConfig:
    pb = raw.get("params", {})
    try:
        params = Params(N=_get(pb, "N", int, 3, "params"), m=_get(pb, "m", float, 2.0, "params"),
                        gamma=_get(pb, "gamma", float, 0.0, "params"),
                        c_under=_get(pb, "c_under", float, 0.5, "params"),
                        c_over=_get(pb, "c_over", float, 1.0, "params"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"params: {exc}") from None
    gb = raw.get("grid", {})
    R_max = _get(gb, "R_max", float, _REQUIRED, "grid")
    K = _get(gb, "K", int, _REQUIRED, "grid")
    grading = _get(gb, "grading", str, "uniform", "grid")
    ratio = _get(gb, "ratio", float, None, "grid")
    ib = dict(raw.get("initial", {}))
    kind = _get(ib, "kind", str, _REQUIRED, "initial")
    if kind not in ("barenblatt", "blowup", "dirac", "csv", "friendly_giant"):
        raise ConfigError(f"initial.kind: unknown initial data {kind!r}")
    t_start = _get(ib, "t_start", float, 0.1 if kind == "barenblatt" else 0.0, "initial")
    bcb = dict(raw.get("bc", {"kind": "zero_flux"}))
    bkind = _get(bcb, "kind", str, "zero_flux", "bc")
    if bkind not in ("zero_flux", "dirichlet", "blowup", "pressure"):
        raise ConfigError(f"bc.kind: unknown boundary condition {bkind!r}")
    if bkind == "blowup" and kind != "blowup":
        raise ConfigError("bc.kind: exact blow-up pressure needs blow-up initial data")
    cb = raw.get("control", {})
    try:
        control = StepControl(dt0=_get(cb, "dt0", float, 1e-3, "control"),
                              dt_min=_get(cb, "dt_min", float, 1e-9, "control"),
                              dt_max=_get(cb, "dt_max", float, math.inf, "control"),
                              dt_max_rel=_get(cb, "dt_max_rel", float, None, "control"),
                              shrink=_get(cb, "shrink", float, 0.5, "control"),
                              grow=_get(cb, "grow", float, 1.2, "control"),
                              newton_tol=_get(cb, "newton_tol", float, 1e-11, "control"),
                              newton_max=_get(cb, "newton_max", int, 30, "control"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"control: {exc}") from None
    sb = raw.get("schedule", {})
    times = [float(t) for t in _get(sb, "times", list, [], "schedule")]
    t_end = _get(sb, "t_end", float, max(times) if times else t_start, "schedule")
    if not t_end > t_start:
        raise ConfigError(f"schedule: zero-length schedule, t_end = {t_end} <= t_start = {t_start}")
    bad = [t for t in times if not t_start <= t <= t_end]
    if bad:
        raise ConfigError(f"schedule.times: {bad} outside [{t_start}, {t_end}]")
    checks = raw.get("checks", {})
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ConfigError(f"checks: unknown check(s) {sorted(unknown)}")
    cfg = RunConfig(raw=raw, params=params, weight=dict(raw.get("weight", {})), R_max=R_max, K=K,
                    grading=grading, ratio=ratio, initial=ib, bc=bcb, control=control,
                    report_blowup=_get(cb, "report_blowup", bool, True, "control"),
                    t_start=t_start, t_end=t_end, times=times, checks=checks,
                    output_dir=Path(os.environ.get(OUTPUT_ENV) or raw.get("output_dir", "wpme-out")),
                    seed=_get(raw, "seed", int, 0, "config"),
                    convergence=dict(raw.get("convergence", {})))
    try:
        cfg.weight_model()
        make_grid(R_max, K, grading, ratio, N=params.N)
    except (ValueError, KeyError, OSError) as exc:
        raise ConfigError(f"grid/weight: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw)


# --- runs ------------------------------------------------------------------

def build_initial(cfg: RunConfig, K: int | None = None) -> tuple[Field, object]:
    """Initial field on the configured grid and the boundary condition that goes with it."""
    K = cfg.K if K is None else K
    p = cfg.params
    grid = make_grid(cfg.R_max, K, cfg.grading, cfg.ratio, N=p.N, weight=cfg.weight_model())
    ib = cfg.initial
    kind = ib["kind"]
    extra = None
    if kind == "barenblatt":
        if "c1" in ib:
            bp = BarenblattParams(p, float(ib["c1"]))
        else:
            bp = BarenblattParams.from_support(p, float(ib.get("support", 1.0)), 1.0)
        u0 = barenblatt_field(grid, bp, cfg.t_start)
    elif kind == "blowup":
        extra = BlowupParams(p, float(ib.get("T", 1.0)))
        u0 = blowup_field(grid, extra, cfg.t_start, average=True)
    elif kind == "dirac":
        u0 = dirac_approx(grid, float(ib.get("M", 1.0)), int(ib.get("k", 1)), cfg.t_start)
    elif kind == "csv":
        prof = load_tabulated_csv(ib["path"])
        u0 = Field(grid, prof(grid.centers), cfg.t_start)
    else:
        fg = friendly_giant_solve(grid, p)
        if cfg.t_start <= 0:
            raise ConfigError("initial.t_start: the separable solution needs t_start > 0")
        u0 = fg.field(cfg.t_start)
    bkind = cfg.bc.get("kind", "zero_flux")
    if bkind == "zero_flux":
        bc = ZeroFlux()
    elif bkind == "dirichlet":
        bc = HomogeneousDirichlet()
    elif bkind == "blowup":
        bc = PressureDirichlet(extra.boundary_pressure(grid.R_max))
    else:
        value = float(cfg.bc.get("value", 0.0))
        bc = PressureDirichlet(lambda t, v=value: v)
    return u0, bc


def required_times(cfg: RunConfig) -> set[float]:
    """Snapshot times the configured checks integrate over."""
    out = set(cfg.times)
    ch = cfg.checks
    for c in ch.get("local_smoothing", {}).get("cylinders", []):
        out.update(c[1:4])
    for c in ch.get("energy", {}).get("cylinders", []):
        out.update(c[2:5])
    origin = cfg.origin
    for s in ch.get("ac", {}).get("samples", []):
        out.update({origin + s[1], origin + s[1] + s[3]})
    # sums like 0.2 + 0.1 must not produce a second snapshot next to 0.3
    return {round(t, 12) for t in out if cfg.t_start < t < cfg.t_end}


def run(cfg: RunConfig, K: int | None = None, control: StepControl | None = None) -> Trajectory:
    u0, bc = build_initial(cfg, K)
    return evolve(u0, cfg.t_end, bc, control or cfg.control, cfg.params,
                  schedule=sorted(required_times(cfg)), report_blowup=cfg.report_blowup)


# --- checks ----------------------------------------------------------------

class _Runs:
    """Lazily computed base and refined trajectories shared by the checks."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._cache = {}

    def get(self, refined: bool = False) -> Trajectory:
        if refined not in self._cache:
            c = self.cfg.refined() if refined else self.cfg
            self._cache[refined] = run(c, c.K, c.control)
        return self._cache[refined]


def _paired(name, runs: _Runs, fn) -> H.EstimateReport:
    coarse, fine = fn(runs.get(False)), fn(runs.get(True))
    rep = H.compare_refinement(name, coarse, fine)
    rep.measured["coarse_report"] = coarse.to_dict()
    rep.measured["fine_report"] = fine.to_dict()
    return rep


def run_check(name: str, cfg: RunConfig, runs: _Runs | None = None) -> H.EstimateReport:
    if name not in CHECKS:
        raise ConfigError(f"unknown check {name!r}; choose from {', '.join(CHECKS)}")
    runs = runs or _Runs(cfg)
    opts = cfg.checks.get(name, {})
    p = cfg.params
    origin = cfg.origin
    where = f"checks.{name}"
    if name == "global_smoothing":
        window = opts.get("window")
        tr, fine = runs.get(False), runs.get(True)
        return H.check_global_smoothing(tr, p, tuple(window) if window else None, refined=fine,
                                        tol=_get(opts, "tol", float, 0.02, where), origin=origin)
    if name == "local_smoothing":
        cyl = [H.Cylinder(*map(float, c)) for c in _get(opts, "cylinders", list, _REQUIRED, where)]
        eps = _get(opts, "eps", float, 0.1, where)
        spread = _get(opts, "spread_tol", float, None, where)
        return _paired(name, runs, lambda tr: H.check_local_smoothing(tr, p, cyl, eps, spread))
    if name == "ac":
        samples = [H.ACSample(*map(float, s)) for s in _get(opts, "samples", list, _REQUIRED, where)]
        mass = None
        if cfg.initial["kind"] == "dirac":
            M = float(cfg.initial.get("M", 1.0))
            mass = lambda R: M  # noqa: E731
        return _paired(name, runs, lambda tr: H.check_AC(tr, p, samples, origin=origin,
                                                         initial_mass=mass))
    if name == "ab":
        return H.check_AB_monotonicity(runs.get(), p, origin=origin,
                                       tol=_get(opts, "tol", float, 1e-6, where),
                                       floor=_get(opts, "floor", float, 1e-6, where))
    if name == "contraction":
        u0, bc = build_initial(cfg)
        c = u0.grid.centers
        bump = _get(opts, "bump_amplitude", float, 0.1, where) * np.exp(
            -(((c - _get(opts, "bump_center", float, 0.5 * cfg.R_max, where))
               / _get(opts, "bump_width", float, 0.1 * cfg.R_max, where)) ** 2))
        sched = sorted(required_times(cfg))
        v = evolve(u0.with_values(u0.values + bump), cfg.t_end, bc, cfg.control, p, schedule=sched)
        return H.check_contraction_and_comparison(runs.get(), v,
                                                  _get(opts, "order_tol", float, 1e-10, where),
                                                  _get(opts, "contraction_tol", float, 1e-8, where))
    if name == "energy":
        cyl = [H.EnergyCylinders(*map(float, c)) for c in _get(opts, "cylinders", list, _REQUIRED, where)]
        pp = _get(opts, "p", float, 2.0, where)
        return _paired(name, runs, lambda tr: H.check_energy(tr, p, cyl, pp))
    if name == "sobolev":
        return H.check_sobolev(p, cfg.weight_model(), R=_get(opts, "R", float, 1.0, where),
                               resolutions=tuple(_get(opts, "resolutions", list, [256, 512], where)),
                               n_profiles=_get(opts, "n_profiles", int, 120, where), seed=cfg.seed)
    if name == "scaling":
        u0, bc = build_initial(cfg)
        fine_cfg = cfg.refined()
        u0f, _ = build_initial(fine_cfg)
        return H.check_scaling(u0, p, cfg.t_end, _get(opts, "factor", float, 1.3, where), cfg.control,
                               refined=(u0f, fine_cfg.control),
                               tol=_get(opts, "tol", float, 1e-2, where), bc=bc)
    if name == "existence_time":
        coeffs = [float(c) for c in _get(opts, "coefficients", list, _REQUIRED, where)]
        return H.check_existence_time(p, coeffs, K=_get(opts, "K", int, cfg.K, where),
                                      R_max=_get(opts, "R_max", float, cfg.R_max, where),
                                      max_horizon=_get(opts, "max_horizon", float, 50.0, where))
    # flb
    tr = runs.get()
    usable = [k for k in range(len(tr)) if tr.times[k] > origin]
    if len(usable) < 2:
        raise ConfigError(f"{where}: need two snapshots after the time origin")
    pairs = [(a, b) for i, a in enumerate(usable) for b in usable[i:]]
    probes = H.interior_probes(tr[usable[-1]], _get(opts, "probes", int, 5, where))
    rep = H.check_flb(tr, p, pairs, probes, origin=origin,
                      rel_tol=_get(opts, "rel_tol", float, 1e-8, where))
    need = _get(opts, "min_triples", int, 20, where)
    if rep.measured["triples"] < need:
        rep.passed = False
        rep.notes += f" (fewer than {need})"
    return rep


# --- output ----------------------------------------------------------------

def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(H._jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_snapshot(path: Path, f: Field) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u"])
        for r, u in zip(f.grid.centers, f.values):
            w.writerow([f"{r:.17g}", f"{u:.17g}"])


def snapshot_name(index: int, t: float) -> str:
    return f"snap_{index:04d}_{t:.10g}.csv"


def cmd_solve(cfg: RunConfig) -> int:
    tr = run(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, f in enumerate(tr.snapshots):
        name = snapshot_name(k, f.t)
        write_snapshot(out / name, f)
        files.append({"index": k, "time": f.t, "file": name, "mass": discrete_mass(f)})
    inflow = np.concatenate([[0.0], np.cumsum(tr.flux_ledger)])
    masses = np.array([s["mass"] for s in files])
    balance = masses - masses[0] - inflow
    _dump(out / "manifest.json", {
        "config": cfg.raw,
        "params": cfg.params.to_dict(),
        "weight": cfg.weight_model().to_dict(),
        "blowup_time": tr.blowup_time,
        "steps": tr.steps,
        "snapshots": files,
        "mass_ledger": {"boundary_inflow": inflow, "balance_error": balance},
    })
    log.info("wrote %d snapshots to %s", len(files), out)
    return 0


def cmd_verify(cfg: RunConfig, name: str) -> int:
    rep = run_check(name, cfg)
    print(rep.line())
    _dump(cfg.output_dir / f"report_{name}.json", {"config": cfg.raw, "report": rep.to_dict()})
    return 0 if rep.passed else 1


def cmd_suite(cfg: RunConfig) -> int:
    if not cfg.checks:
        raise ConfigError("checks: the suite needs at least one [checks.<name>] block")
    runs = _Runs(cfg)
    reports = []
    for name in CHECKS:
        if name in cfg.checks:
            rep = run_check(name, cfg, runs)
            print(rep.line())
            reports.append(rep.to_dict())
    ok = all(r["passed"] for r in reports)
    _dump(cfg.output_dir / "suite.json", {"config": cfg.raw, "reports": reports, "passed": ok})
    return 0 if ok else 1


def convergence_table(cfg: RunConfig, resolutions) -> list[dict]:
    """Relative L1_rho errors of Barenblatt and blow-up runs against the exact solutions."""
    p = cfg.params
    cb = cfg.convergence
    base = resolutions[0]
    rows = []
    bar = BarenblattParams.from_support(p, float(cb.get("support", 1.0)), 1.0)
    t0, t1 = float(cb.get("barenblatt_t0", 0.1)), float(cb.get("barenblatt_t1", 1.0))
    R_bar = float(cb.get("barenblatt_R_max", 4.0))
    T = float(cb.get("blowup_T", 1.0))
    t_blow = float(cb.get("blowup_t_end", 0.5 * T))
    dt = float(cb.get("dt", 4e-3))
    for case in ("barenblatt", "blowup"):
        prev = None
        for K in resolutions:
            ctl = StepControl.fixed(dt * base / K)
            if case == "barenblatt":
                grid = make_grid(R_bar, K, N=p.N, weight=PurePower(p.gamma))
                tr = evolve(barenblatt_field(grid, bar, t0), t1, ZeroFlux(), ctl, p)
                exact = barenblatt_field(grid, bar, t1)
            else:
                bp = BlowupParams(p, T)
                grid = make_grid(1.0, K, N=p.N, weight=PurePower(p.gamma))
                tr = evolve(blowup_field(grid, bp, 0.0, average=True), t_blow,
                            PressureDirichlet(bp.boundary_pressure(1.0)), ctl, p)
                exact = blowup_field(grid, bp, t_blow, average=True)
            err = l1_distance(tr.final, exact) / float(np.dot(grid.masses, np.abs(exact.values)))
            order = math.log2(prev / err) if prev else math.nan
            rows.append({"case": case, "resolution": K, "error": err, "order": order})
            prev = err
    return rows


def cmd_convergence(cfg: RunConfig, resolutions) -> int:
    if len(resolutions) < 2:
        raise ConfigError("convergence: need at least two resolutions")
    rows = convergence_table(cfg, resolutions)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "resolution", "error", "observed_order"])
        for r in rows:
            w.writerow([r["case"], r["resolution"], f"{r['error']:.17g}", f"{r['order']:.17g}"])
            print(f"{r['case']:>10} K={r['resolution']:<5} error={r['error']:.4e} order={r['order']:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wpme", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "suite", "convergence"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML run configuration")
        if name == "verify":
            sp.add_argument("check", choices=CHECKS)
        if name == "convergence":
            sp.add_argument("--resolutions", type=int, nargs="+", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.check)
        if args.command == "suite":
            return cmd_suite(cfg)
        res = args.resolutions or cfg.convergence.get("resolutions", [64, 128, 256])
        return cmd_convergence(cfg, [int(k) for k in res])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StepSizeCollapse, NewtonDiverged, NonFiniteState, FloatingPointError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
