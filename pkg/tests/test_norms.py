import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wpme.core import Field, Params, make_grid
from wpme.norms import (CutoffProfile, ball_masses, cutoff_profile, ell_estimate, existence_time,
                        l1_phi_alpha, morrey_1r, morrey_1r_cutoff, morrey_inf_r,
                        phi_alpha_threshold, weighted_Lp_ball)
from wpme.oracle import dirac_approx
from wpme.weights import PurePower


def _grid(gamma=0.0, R=1.0, K=16):
    return make_grid(R, K, N=3, weight=PurePower(gamma))


@pytest.mark.parametrize("gamma, expected", [(0.0, 4 * math.pi / 3), (1.0, 2 * math.pi)])
def test_ball_norm_of_one(gamma, expected):
    g = _grid(gamma)
    f = Field(g, np.ones(g.K))
    assert weighted_Lp_ball(f, 1, 1.0) == pytest.approx(expected, rel=1e-14)
    assert weighted_Lp_ball(f.scaled(0.0), 2, 1.0) == 0.0


def test_ball_norm_partial_cell():
    g = _grid(0.0, 2.0, 4)
    f = Field(g, np.ones(4))
    assert weighted_Lp_ball(f, 1, 0.7) == pytest.approx(4 * math.pi * 0.7**3 / 3, rel=1e-13)
    assert weighted_Lp_ball(f, 3, 0.7) == pytest.approx((4 * math.pi * 0.7**3 / 3) ** (1 / 3))
    with pytest.raises(ValueError):
        weighted_Lp_ball(f, 0.5)
    with pytest.raises(ValueError):
        weighted_Lp_ball(f, 1, 3.0)


def test_morrey_dirac():
    p = Params(N=3, m=2.0, gamma=0.0)
    g = make_grid(4.0, 64)
    f = dirac_approx(g, 1.0, 1)
    rep = morrey_1r(f, p, 0.5)
    assert rep.value == pytest.approx(0.5 ** -p.mass_exponent, rel=1e-12)
    assert rep.argmax_radius == 0.5


@pytest.mark.parametrize("gamma, m", [(0.0, 2.0), (1.0, 2.0), (0.5, 3.0)])
def test_morrey_scale_invariant_profile(gamma, m):
    p = Params(N=3, m=m, gamma=gamma)
    a = p.growth_exponent
    kappa = 0.3
    g = _grid(gamma, 4.0, 64)
    f = Field.from_function(g, lambda r: kappa * r**a, average=True, nodes=16)
    expected = kappa * 4 * math.pi / (3 - gamma + a)
    for r in (0.25, 1.0, 2.0):
        assert morrey_1r(f, p, r).value == pytest.approx(expected, rel=1e-8)
    assert ell_estimate(f, p, 0.5).value == pytest.approx(expected, rel=1e-8)
    # the sup of the profile over each cell sits at its outer edge
    upper = Field(g, kappa * g.edges[1:] ** a)
    for r in g.edges[1::8]:
        assert morrey_inf_r(upper, p, r).value == pytest.approx(kappa, rel=1e-12)


def test_morrey_inf_constant_and_zero():
    p = Params()
    g = _grid(0.0, 4.0, 16)
    rep = morrey_inf_r(Field(g, np.ones(16)), p, 1.0)
    assert rep.value == pytest.approx(1.0) and rep.argmax_radius == 1.0
    assert morrey_inf_r(Field(g, np.zeros(16)), p, 1.0).value == 0.0
    assert morrey_1r(Field(g, np.zeros(16)), p, 1.0).value == 0.0
    with pytest.raises(ValueError):
        morrey_1r(Field(g, np.ones(16)), p, 5.0)


fields = st.lists(st.floats(-10, 10, allow_subnormal=False), min_size=32, max_size=32)


@given(fields, st.floats(0.05, 3.9), st.floats(0.05, 3.9), st.floats(0.0, 1.9))
@settings(max_examples=60)
def test_morrey_monotone_in_r(vals, r1, r2, gamma):
    p = Params(gamma=gamma)
    f = Field(_grid(gamma, 4.0, 32), np.array(vals))
    lo, hi = sorted((r1, r2))
    assert morrey_1r(f, p, hi).value <= morrey_1r(f, p, lo).value * (1 + 1e-12) + 1e-300
    assert morrey_inf_r(f, p, hi).value <= morrey_inf_r(f, p, lo).value * (1 + 1e-12) + 1e-300


@given(fields, st.floats(0.05, 3.9), st.floats(0.0, 1.9))
@settings(max_examples=60)
def test_one_norm_below_inf_norm(vals, r, gamma):
    p = Params(gamma=gamma)
    f = Field(_grid(gamma, 4.0, 32), np.array(vals))
    c = 4 * math.pi / (3 - gamma)
    assert morrey_1r(f, p, r).value <= c * morrey_inf_r(f, p, r).value * (1 + 1e-12)


def test_ball_masses_match_ball_norm():
    g = _grid(1.0, 4.0, 32)
    f = Field(g, np.linspace(1, 2, 32))
    for R in (0.3, 1.0, 3.3, 4.0):
        assert ball_masses(f, [R])[0] == pytest.approx(weighted_Lp_ball(f, 1, R), rel=1e-13)


def test_ell_estimate_decays_for_compact_support():
    p = Params()
    vals = []
    for R_max in (4.0, 8.0, 16.0):
        g = make_grid(R_max, 64)
        vals.append(ell_estimate(dirac_approx(g, 1.0, 1), p).value)
    assert vals[0] > vals[1] > vals[2]
    with pytest.raises(ValueError):
        ell_estimate(dirac_approx(make_grid(1.0, 4), 1.0), p, 0.9)


def test_l1_phi_alpha():
    p = Params()
    g = _grid(0.0, 20.0, 200)
    one = Field(g, np.ones(200))
    alpha0 = phi_alpha_threshold(p)
    assert alpha0 == pytest.approx(2.5)
    vals = [l1_phi_alpha(one, p, a) for a in (2.6, 4.0, 10.0)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert l1_phi_alpha(one.scaled(0.0), p, 3.0) == 0.0
    with pytest.raises(ValueError):
        l1_phi_alpha(one, p, 2.5)


def test_l1_phi_alpha_stable_under_domain_growth():
    p = Params()
    out = []
    for R in (50.0, 100.0):
        g = _grid(0.0, R, int(20 * R))
        out.append(l1_phi_alpha(Field.from_function(g, lambda r: r**2), p, 4.0))
    assert out[1] == pytest.approx(out[0], rel=1e-4)


def test_existence_time_examples():
    assert existence_time(0.0, 2.0) == math.inf
    assert existence_time(2.0, 2.0, C1=1.0) == pytest.approx(0.5)
    assert existence_time(2.0, 3.0) == pytest.approx(existence_time(1.0, 3.0) / 4)
    with pytest.raises(ValueError):
        existence_time(-1.0, 2.0)


@given(st.floats(0.01, 100.0), st.floats(1.1, 4.0))
def test_existence_time_scaling(k, m):
    assert existence_time(k * 0.7, m) == pytest.approx(existence_time(0.7, m) * k ** -(m - 1))


@pytest.mark.parametrize("R", [1.0, 10.0])
def test_cutoff_profile(R):
    phi = cutoff_profile(R)
    assert phi(0.5 * R) == 1.0 and phi(3 * R) == 0.0
    r = np.linspace(0, 3 * R, 6001)
    v = phi(r)
    assert np.all((v >= 0) & (v <= 1))
    assert np.max(np.abs(phi.derivative(r))) * R == pytest.approx(1.875, rel=1e-6)
    assert np.max(np.abs(phi.second_derivative(r))) * R**2 < 6
    assert np.all(np.abs(phi.laplacian(r, 3)) * R**2 < 40)
    # finite differences agree with the analytic derivative
    h = 1e-6 * R
    x = np.array([1.2, 1.5, 1.9]) * R
    np.testing.assert_allclose((phi(x + h) - phi(x - h)) / (2 * h), phi.derivative(x), rtol=1e-6)
    with pytest.raises(ValueError):
        CutoffProfile(0.0)


def test_cutoff_norm_is_comparable():
    p = Params()
    g = _grid(0.0, 8.0, 128)
    f = Field.from_function(g, lambda r: np.exp(-r**2))
    a = morrey_1r(f, p, 0.5).value
    b = morrey_1r_cutoff(f, p, 0.5).value
    # phi_R sits between the indicators of B_R and B_2R
    assert a * 2 ** -p.mass_exponent <= b * (1 + 1e-12) and b <= a * 2**p.mass_exponent
