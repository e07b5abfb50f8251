import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wpme.core import (Field, Params, Trajectory, fv_divergence, fv_laplacian, make_grid,
                       scaling_constants, signed_power, sphere_area, unit_ball_volume)
from wpme.weights import PurePower

params_st = st.builds(
    Params,
    N=st.integers(3, 8),
    m=st.floats(1.01, 6.0),
    gamma=st.floats(0.0, 1.99),
)


@pytest.mark.parametrize("N, m, gamma, lam, theta", [
    (3, 2.0, 0.0, 0.6, 2 / 3),
    (4, 2.0, 1.0, 0.75, 1 / 3),
    (3, 2.0, 1.0, 2 / 3, 0.5),
])
def test_scaling_constants_hand_values(N, m, gamma, lam, theta):
    sc = scaling_constants(Params(N=N, m=m, gamma=gamma))
    assert sc.lam == pytest.approx(lam, rel=1e-14)
    assert sc.theta == pytest.approx(theta, rel=1e-14)


@given(params_st)
def test_scaling_identity(p):
    sc = scaling_constants(p)
    assert abs(sc.lam * (p.m - 1) + sc.theta * sc.lam - 1) < 1e-14


@pytest.mark.parametrize("kw", [
    {"N": 2}, {"m": 1.0}, {"gamma": 2.0}, {"gamma": -0.1}, {"c_under": 1.0, "c_over": 1.0},
    {"c_under": 0.0},
])
def test_params_rejects_invalid(kw):
    with pytest.raises(ValueError):
        Params(**kw)


def test_sphere_constants():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert unit_ball_volume(2 + 2) == pytest.approx(math.pi**2 / 2)


def test_uniform_grid_edges_and_volume():
    g = make_grid(1.0, 4)
    np.testing.assert_allclose(g.edges, [0, 0.25, 0.5, 0.75, 1.0])
    assert g.volumes.sum() == pytest.approx(4 * math.pi / 3, rel=1e-14)


def test_geometric_grading_ratio():
    g = make_grid(2.0, 8, grading="geometric", ratio=1.3)
    w = np.diff(g.edges)
    np.testing.assert_allclose(w[1:] / w[:-1], 1.3, rtol=1e-12)
    assert g.edges[-1] == 2.0


@pytest.mark.parametrize("kw", [
    {"K": 2}, {"grading": "geometric", "ratio": 1.0}, {"grading": "geometric"}, {"grading": "log"},
])
def test_grid_errors(kw):
    args = {"R_max": 1.0, "K": 8, **kw}
    with pytest.raises(ValueError):
        make_grid(**args)


@given(st.floats(0.0, 1.9), st.integers(4, 64), st.floats(0.1, 10.0))
@settings(max_examples=40)
def test_refinement_preserves_totals(gamma, K, R):
    a = make_grid(R, K, weight=PurePower(gamma))
    b = make_grid(R, 2 * K, weight=PurePower(gamma))
    assert b.volumes.sum() == pytest.approx(a.volumes.sum(), rel=1e-12)
    assert b.masses.sum() == pytest.approx(a.masses.sum(), rel=1e-12)
    assert np.all(a.masses > 0) and np.all(np.isfinite(a.masses))


def test_partial_mass_and_fractions():
    g = make_grid(2.0, 8, weight=PurePower(1.0))
    assert g.partial_mass(1.0) == pytest.approx(2 * math.pi)
    assert g.fractional_masses(1.1).sum() == pytest.approx(g.partial_mass(1.1))
    assert g.fractional_masses(2.0).sum() == pytest.approx(g.masses.sum())


def test_field_is_immutable():
    g = make_grid(1.0, 8)
    f = Field(g, np.ones(8), 0.5)
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    h = f.scaled(3.0)
    assert h is not f and f.values[0] == 1.0 and h.values[0] == 3.0


@pytest.mark.parametrize("values", [np.ones(7), np.array([np.nan] * 8)])
def test_field_validation(values):
    with pytest.raises(ValueError):
        Field(make_grid(1.0, 8), values)


def test_cell_averages_of_polynomial_are_exact():
    g = make_grid(1.0, 8)
    f = Field.from_function(g, lambda r: r**2, average=True)
    # rho-weighted average of r^2 over a shell, closed form
    a, b = g.edges[:-1], g.edges[1:]
    exact = (3 / 5) * (b**5 - a**5) / (b**3 - a**3)
    np.testing.assert_allclose(f.values, exact, rtol=1e-13)


def test_trajectory_validation():
    g = make_grid(1.0, 8)
    s = [Field(g, np.zeros(8), t) for t in (0.0, 1.0)]
    Trajectory(tuple(s), np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        Trajectory(tuple(s[::-1]), np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        Trajectory(tuple(s), np.zeros(2), np.zeros(2))


@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8), st.floats(1.0, 4.0))
def test_signed_power_is_odd(vals, p):
    u = np.array(vals)
    np.testing.assert_allclose(signed_power(-u, p), -signed_power(u, p))


@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_divergence_telescopes(vals):
    g = make_grid(1.0, 8)
    net, outer = fv_divergence(g, np.array(vals), None)
    assert abs(net.sum()) < 1e-12 * (1 + np.abs(vals).sum() * g.transmissibilities.max())
    assert outer == 0.0
    net, outer = fv_divergence(g, np.array(vals), 0.7)
    assert net.sum() == pytest.approx(outer, abs=1e-11)


def test_laplacian_of_quadratic_is_exact_inside():
    g = make_grid(1.0, 32)
    c = g.centers
    lap = fv_laplacian(g, c**2, None)
    # interior cells see the exact 2N up to the O(h^2/r^2) centre-offset error
    assert np.all(np.abs(lap[4:-1] - 6.0) < 0.05)
