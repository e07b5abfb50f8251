import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wpme.core import Field, Params, make_grid
from wpme.oracle import (BarenblattParams, BlowupParams, barenblatt_field, blowup_field,
                         dirac_approx)
from wpme.solver import (HomogeneousDirichlet, PressureDirichlet, StepControl, StepSizeCollapse,
                         ZeroFlux, discrete_mass, evolve, l1_distance, step, step_detailed)
from wpme.weights import PerturbedPower, PurePower

P = Params()


def test_constant_is_steady():
    g = make_grid(1.0, 32)
    f = Field(g, 0.7 * np.ones(32), 0.0)
    out = step(f, 0.1, ZeroFlux(), StepControl(), P)
    np.testing.assert_allclose(out.values, 0.7, rtol=1e-12)
    assert out.t == pytest.approx(0.1)


def test_zero_field_stays_zero():
    g = make_grid(1.0, 16)
    tr = evolve(Field(g, np.zeros(16)), 1.0, ZeroFlux(), StepControl(dt0=0.1), P, schedule=[0.5])
    assert np.all(tr.values == 0) and list(tr.times) == [0.0, 0.5, 1.0]


def _barenblatt_step_error(K, dt):
    bp = BarenblattParams.from_support(P, 1.0, 1.0)
    g = make_grid(2.0, K)
    out = step(barenblatt_field(g, bp, 1.0), dt, ZeroFlux(), StepControl(), P)
    return np.max(np.abs(out.values - barenblatt_field(g, bp, 1.0 + dt).values))


def test_single_step_against_barenblatt():
    e1 = _barenblatt_step_error(256, 2e-3)
    e2 = _barenblatt_step_error(512, 1e-3)
    assert e2 <= 1e-2
    assert e2 < 0.6 * e1


def _blowup_step_error(K, dt):
    bp = BlowupParams(P, 1.0)
    g = make_grid(1.0, K)
    bc = PressureDirichlet(bp.boundary_pressure(1.0))
    out = step(blowup_field(g, bp, 0.5, average=True), dt, bc, StepControl(), P)
    exact = blowup_field(g, bp, 0.5 + dt, average=True).values
    return np.max(np.abs(out.values - exact)) / np.max(exact)


def test_single_step_against_blowup():
    e1 = _blowup_step_error(256, 2e-3)
    e2 = _blowup_step_error(512, 1e-3)
    assert e2 <= 1e-2 and e2 < 0.6 * e1


@pytest.mark.parametrize("weight", [PurePower(0.0), PurePower(1.0), PerturbedPower(1.0, 0.5, 3.0)])
def test_zero_flux_conserves_mass(weight):
    g = make_grid(3.0, 64, weight=weight)
    f = dirac_approx(g, 2.0, 4, t=0.01)
    tr = evolve(f, 1.0, ZeroFlux(), StepControl(dt0=1e-3), P, schedule=np.linspace(0.1, 0.9, 9))
    masses = np.array([discrete_mass(s) for s in tr.snapshots])
    assert np.max(np.abs(masses / masses[0] - 1)) <= 1e-10
    assert np.all(tr.flux_ledger == 0)


def test_dirichlet_mass_balance():
    g = make_grid(1.0, 64)
    f = Field.from_function(g, lambda r: 1 - r**2)
    tr = evolve(f, 0.5, HomogeneousDirichlet(), StepControl(dt0=1e-3), P,
                schedule=[0.1, 0.2, 0.3])
    masses = np.array([discrete_mass(s) for s in tr.snapshots])
    change = np.diff(masses)
    np.testing.assert_allclose(change, tr.flux_ledger, rtol=1e-9, atol=1e-12 * masses[0])
    assert np.all(change < 0)


def test_blowup_detected_near_T():
    bp = BlowupParams(P, 1.0)
    g = make_grid(1.0, 128)
    ctl = StepControl(dt0=1e-3, dt_max=1e-3, dt_min=1e-7)
    tr = evolve(blowup_field(g, bp, 0.0, average=True), 1.5,
                PressureDirichlet(bp.boundary_pressure(1.0)), ctl, P)
    assert tr.blowup_time == pytest.approx(1.0, rel=2e-2)
    assert tr.final.t == tr.blowup_time
    with pytest.raises(StepSizeCollapse) as err:
        evolve(blowup_field(g, bp, 0.0, average=True), 1.5,
               PressureDirichlet(bp.boundary_pressure(1.0)), ctl, P, report_blowup=False)
    assert err.value.trajectory.blowup_time == pytest.approx(1.0, rel=2e-2)


def test_snapshots_exactly_on_schedule():
    g = make_grid(1.0, 16)
    f = Field.from_function(g, lambda r: 1 + 0 * r)
    sched = [0.013, 0.2, 0.2000001, 0.77]
    tr = evolve(f, 1.0, ZeroFlux(), StepControl(dt0=0.03, grow=1.5), P, schedule=sched)
    assert list(tr.times) == [0.0, *sched, 1.0]


def test_step_control_validation():
    with pytest.raises(ValueError):
        StepControl(dt0=1e-3, dt_min=1e-2)
    with pytest.raises(ValueError):
        StepControl(shrink=1.0)
    with pytest.raises(ValueError):
        StepControl(grow=0.9)
    with pytest.raises(ValueError):
        step(Field(make_grid(1.0, 8), np.ones(8)), 0.0, ZeroFlux(), StepControl(), P)
    ctl = StepControl.fixed(0.01)
    assert ctl.dt0 == ctl.dt_max == 0.01 and ctl.grow == 1.0


def test_sign_changing_run_conserves_mass():
    g = make_grid(1.0, 64)
    f = Field.from_function(g, lambda r: np.cos(3 * r))
    ctl = StepControl(dt0=1e-3, nonnegative=False)
    tr = evolve(f, 0.2, ZeroFlux(), ctl, Params(m=3.0))
    assert discrete_mass(tr.final) == pytest.approx(discrete_mass(f), rel=1e-10, abs=1e-12)
    assert tr.final.values.min() < 0


profiles = st.lists(st.floats(0.0, 2.0, allow_subnormal=False), min_size=16, max_size=16)


@given(profiles, profiles, st.floats(1.2, 3.0))
@settings(max_examples=25, deadline=None)
def test_comparison_contraction_nonnegativity(a, b, m):
    p = Params(m=m)
    g = make_grid(1.0, 16, weight=PurePower(0.5))
    u0 = np.array(a)
    v0 = u0 + np.array(b)
    u = Field(g, u0)
    v = Field(g, v0)
    ctl = StepControl(dt0=1e-3)
    sched = [0.01, 0.02, 0.05]
    tu = evolve(u, 0.1, ZeroFlux(), ctl, p, schedule=sched)
    tv = evolve(v, 0.1, ZeroFlux(), ctl, p, schedule=sched)
    d = [l1_distance(x, y) for x, y in zip(tu.snapshots, tv.snapshots)]
    for k in range(len(d) - 1):
        assert d[k + 1] <= d[k] * (1 + 1e-8) + 1e-12
    for x, y in zip(tu.snapshots, tv.snapshots):
        assert np.all(x.values <= y.values + 1e-10)
        assert np.all(x.values >= -1e-12)


def test_step_detailed_reports_boundary():
    g = make_grid(1.0, 16)
    f = Field(g, np.ones(16))
    res = step_detailed(f, 0.01, PressureDirichlet(lambda t: 4.0), StepControl(), P)
    assert res.boundary_pressure == 4.0 and res.outer_flux > 0
    res = step_detailed(f, 0.01, ZeroFlux(), StepControl(), P)
    assert res.outer_flux == 0.0
