import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from wpme.core import Params, make_grid, scaling_constants
from wpme.norms import weighted_Lp_ball
from wpme.oracle import (BarenblattParams, BlowupParams, ConvergenceError, barenblatt_c2,
                         barenblatt_eval, barenblatt_mass, barenblatt_residual, blowup_eval,
                         blowup_kappa, blowup_residual, dirac_approx, friendly_giant_solve,
                         wpme_residual)
from wpme.weights import PurePower


def test_classical_coefficients():
    p = Params(N=3, m=2.0, gamma=0.0)
    assert barenblatt_c2(p) == pytest.approx(1 / 20, rel=1e-14)
    assert blowup_kappa(p) == pytest.approx(1 / 20, rel=1e-14)


@given(st.integers(3, 7), st.floats(1.05, 5.0))
def test_c2_matches_unweighted_value(N, m):
    p = Params(N=N, m=m, gamma=0.0)
    lam = scaling_constants(p).lam
    assert barenblatt_c2(p) == pytest.approx(lam * (m - 1) / (2 * m * N), rel=1e-13)


def _beta_mass(bp):
    # substitute x = c2 r^(2-gamma) / c1 in the mass integral at t = 1
    p = bp.params
    g, q = p.gamma, 1 / (p.m - 1)
    a = (p.N - g) / (2 - g)
    return (4 * math.pi if p.N == 3 else None) * bp.c1**q / (2 - g) * (bp.c1 / bp.c2) ** a \
        * special.beta(a, q + 1)


@pytest.mark.parametrize("gamma, m", [(0.0, 2.0), (1.0, 2.0), (0.5, 3.0), (1.5, 1.5)])
def test_barenblatt_mass_closed_form(gamma, m):
    bp = BarenblattParams(Params(N=3, m=m, gamma=gamma), 0.7)
    assert barenblatt_mass(bp, 1.0) == pytest.approx(_beta_mass(bp), rel=1e-10)
    assert barenblatt_mass(bp, 2.0) == pytest.approx(barenblatt_mass(bp, 1.0), rel=1e-8)
    assert BarenblattParams.from_mass(bp.params, bp.mass).c1 == pytest.approx(0.7, rel=1e-10)


def test_barenblatt_pointwise():
    bp = BarenblattParams(Params(), 2.0)
    lam = scaling_constants(bp.params).lam
    assert barenblatt_eval(0.0, 3.0, bp) == pytest.approx(2.0 * 3.0**-lam)
    rs = bp.support_radius(3.0)
    assert barenblatt_eval(rs * 1.01, 3.0, bp) == 0.0
    assert barenblatt_eval(rs * 0.99, 3.0, bp) > 0
    with pytest.raises(ValueError):
        barenblatt_eval(0.1, 0.0, bp)
    fs = BarenblattParams.from_support(bp.params, 1.5, 2.0)
    assert fs.support_radius(2.0) == pytest.approx(1.5)


@pytest.mark.parametrize("gamma", [0.0, 1.0])
def test_barenblatt_residual_small_and_second_order(gamma):
    bp = BarenblattParams.from_support(Params(gamma=gamma), 1.0)
    samples = [(0.3, 1.0), (0.5, 1.5), (0.7, 2.0)]
    r1 = barenblatt_residual(bp, samples, h=1e-3)
    r2 = barenblatt_residual(bp, samples, h=5e-4)
    assert r1 <= 1e-4
    assert r2 < r1 / 3


def test_barenblatt_residual_negative_control():
    bp = BarenblattParams.from_support(Params(), 1.0)
    lam = scaling_constants(bp.params).lam
    theta = scaling_constants(bp.params).theta

    def wrong(r, t):
        core = bp.c1 - 1.1 * bp.c2 * t ** (-theta * lam) * r**2
        return t**-lam * np.maximum(core, 0.0)

    s = [(0.3, 1.0), (0.5, 1.5)]
    res = [np.max(np.abs(wpme_residual(wrong, bp.params, s, h))) for h in (1e-3, 1e-4)]
    # a wrong coefficient leaves an O(1) defect that refinement does not remove
    assert min(res) > 1e-3
    assert res[1] == pytest.approx(res[0], rel=1e-2)


def test_residual_rejects_free_boundary():
    bp = BarenblattParams.from_support(Params(), 1.0)
    with pytest.raises(ValueError):
        barenblatt_residual(bp, [(0.9999, 1.0)])


def test_zero_solution_has_zero_residual():
    res = wpme_residual(lambda r, t: 0 * r, Params(), [(0.5, 1.0)], 1e-3)
    assert np.all(res == 0)


@pytest.mark.parametrize("gamma, m", [(0.0, 2.0), (1.0, 2.0), (0.5, 3.0)])
def test_blowup_solution(gamma, m):
    bp = BlowupParams(Params(gamma=gamma, m=m), T=1.0)
    s = [(0.5, 0.2), (1.0, 0.5), (2.0, 0.7)]
    r1 = blowup_residual(bp, s, 1e-3)
    r2 = blowup_residual(bp, s, 5e-4)
    scale = max(blowup_eval(r, t, bp) for r, t in s)
    assert r1 < 1e-4 * scale and r2 < r1 / 3
    assert blowup_eval(0.0, 0.5, bp) == 0.0
    with pytest.raises(ValueError):
        blowup_eval(1.0, 1.0, bp)
    assert math.isinf(bp.boundary_pressure(1.0)(1.0))


def test_blowup_growth_and_coefficients():
    p = Params()
    bp = BlowupParams(p, T=1.0)
    vals = [blowup_eval(1.0, 1 - d, bp) for d in (1e-1, 1e-2, 1e-3)]
    np.testing.assert_allclose(vals, [0.5, 5.0, 50.0], rtol=1e-12)
    assert BlowupParams.from_initial_coefficient(p, 0.1).T == pytest.approx(0.5)
    assert BlowupParams(p, 0.25).initial_coefficient == pytest.approx(0.2)


def test_friendly_giant():
    p = Params()
    g = make_grid(1.0, 512)
    a = friendly_giant_solve(g, p)
    b = friendly_giant_solve(g, p, start=np.linspace(5.0, 0.1, 512))
    c = friendly_giant_solve(g, p, start=10 * np.ones(512))
    assert a.residual <= 1e-6 and not a.clamped
    assert np.max(np.abs(a.W - b.W)) <= 1e-8
    assert np.max(np.abs(a.W - c.W)) <= 1e-8
    assert np.all(a.W >= 0) and np.all(np.diff(a.W) <= 0)
    with pytest.raises(ConvergenceError):
        friendly_giant_solve(g, p, max_iters=2)
    with pytest.raises(ValueError):
        friendly_giant_solve(g, p, start=np.zeros(512))


def test_friendly_giant_weighted():
    p = Params(gamma=1.0, m=3.0)
    g = make_grid(1.0, 256, weight=PurePower(1.0))
    fg = friendly_giant_solve(g, p)
    assert fg.relative_residual < 1e-10
    f = fg.field(2.0)
    np.testing.assert_allclose(f.values, fg.W * 2.0**-0.5)


@given(st.floats(0.0, 10.0), st.integers(1, 16), st.floats(0.0, 1.9))
@settings(max_examples=40)
def test_dirac_mass(M, k, gamma):
    g = make_grid(2.0, 16, weight=PurePower(gamma))
    f = dirac_approx(g, M, k)
    assert weighted_Lp_ball(f, 1) == pytest.approx(M, rel=1e-12, abs=1e-300)


def test_dirac_examples():
    g = make_grid(1.0, 8)
    assert dirac_approx(g, 1.0, 1).values[0] == pytest.approx(1 / g.masses[0])
    assert np.all(dirac_approx(g, 0.0, 3).values == 0)
    with pytest.raises(ValueError):
        dirac_approx(g, -1.0)
    with pytest.raises(ValueError):
        dirac_approx(g, 1.0, 0)
