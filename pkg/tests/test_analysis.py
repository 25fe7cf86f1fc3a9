import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrgxy import analysis as A
from qrgxy import measures as M
from qrgxy.qrg import DoubletCoefficients, effective_size, flow_coefficients
from qrgxy.states import rho12

# frozen negativity-derivative peaks for rho12 (golden-section refined, h = 1e-3|gamma|)
PEAK_STEP0 = 0.19017935848
PEAK_STEP2 = 22.5603614


def test_derivative_vanishes_at_isotropic_point_and_in_saturated_regions():
    grid = np.array([-0.9, -0.7, 0.0, 0.7, 0.9])
    curves = A.derivative_curves(["ne", "c", "gqd", "chsh"], 2, grid, h=1e-3)
    for c in curves.values():
        assert c.singular[2] and not c.singular[[0, 1, 3, 4]].any()
        assert np.all(np.abs(c.values[[0, 1, 3, 4]]) < 1e-8)
    # the measures are even in gamma, so the derivative vanishes at the isotropic point
    at0 = A.derivative_curve("ne", 0, np.array([0.0]), h=1e-4).values[0]
    assert abs(at0) < 1e-6


@pytest.mark.parametrize("state", ["rho12", "rho23"])
@pytest.mark.parametrize("step", [0, 1, 2])
def test_derivative_is_antisymmetric(state, step):
    grid = np.linspace(-0.9, 0.9, 19)
    curves = A.derivative_curves(["ne", "c", "gqd", "min"], step, grid, state=state)
    for c in curves.values():
        assert A.antisymmetry_error(c) < 1e-9


def test_richardson_agreement_at_step0():
    grid = np.linspace(-0.95, 0.95, 39)
    curves = A.derivative_curves(["ne", "c", "chsh"], 0, grid, richardson=True)
    for c in curves.values():
        assert np.nanmax(c.richardson_error[~c.singular]) < 1e-6


def test_richardson_agreement_away_from_peaks():
    # near the step-1 peaks the h^2 truncation term exceeds 1e-6; away from them it does not
    grid = np.concatenate([np.linspace(-0.95, -0.1, 12), np.linspace(0.1, 0.95, 12)])
    for step in (1, 2):
        curves = A.derivative_curves(["ne", "c"], step, grid, richardson=True)
        for c in curves.values():
            assert np.max(c.richardson_error) < 1e-6


@pytest.mark.parametrize("gamma", [-0.6, -0.15, 0.05, 0.4])
def test_negativity_derivative_matches_closed_form(gamma):
    curve = A.derivative_curve("ne", 0, np.array([gamma]), h=1e-4)
    h = 1e-5

    def closed(g):
        return M.negativity_closed(flow_coefficients(g, 0), "rho12")

    ref = (closed(gamma + h) - closed(gamma - h)) / (2 * h)
    assert curve.values[0] == pytest.approx(ref, abs=1e-7)


def test_extremum_symmetry_and_frozen_peaks():
    grid = A.scaling_grid()
    e0 = A.extremum(A.derivative_curve("ne", 0, grid, relative_step=1e-3))
    e2 = A.extremum(A.derivative_curve("ne", 2, grid, relative_step=1e-3))
    for e in (e0, e2):
        assert e.bracketed_max and e.bracketed_min
        assert e.gamma_at_max == pytest.approx(-e.gamma_at_min, rel=1e-4)
        assert e.max_value == pytest.approx(-e.min_value, rel=1e-9)
    assert e0.magnitude == pytest.approx(PEAK_STEP0, rel=1e-9)
    assert e2.magnitude == pytest.approx(PEAK_STEP2, rel=1e-7)
    assert e2.magnitude / e0.magnitude == pytest.approx(PEAK_STEP2 / PEAK_STEP0, rel=1e-7)
    assert abs(e2.gamma_at_max) < abs(e0.gamma_at_max)


def test_extremum_on_uniform_grid_agrees_with_log_grid():
    e = A.extremum(A.derivative_curve("ne", 0, np.linspace(-0.9, 0.9, 37)))
    assert e.magnitude == pytest.approx(PEAK_STEP0, rel=1e-9)


def test_extremum_flags_edge_peaks_and_needs_points():
    g = np.linspace(0, 1, 11)
    curve = A.DerivativeCurve(g, g.copy(), "ne", 0, 1e-4)
    e = A.extremum(curve)
    assert (e.gamma_at_max, e.max_value) == (1.0, 1.0)
    assert not e.bracketed_max and not e.bracketed_min
    with pytest.raises(ValueError):
        A.extremum(A.DerivativeCurve(g[:4], g[:4], "ne", 0, 1e-4))


def test_curve_validation():
    with pytest.raises(ValueError):
        A.DerivativeCurve(np.array([0.0, 0.0]), np.array([1.0, 2.0]), "ne", 0, 1e-4)
    with pytest.raises(ValueError):
        A.derivative_curves(["ne"], 0, np.array([0.0]), h=0.0)
    with pytest.raises(ValueError):
        A.derivative_curves(["ne"], 0, np.array([0.99995]), h=1e-4)
    with pytest.raises(ValueError):
        A.measure_function("zz")
    c = A.DerivativeCurve(np.array([0.0, 1.0]), np.array([np.nan, 1.0]), "ne", 0, 1e-4)
    assert c.singular.tolist() == [True, False]


def test_relative_step_rule():
    c = A.derivative_curve("ne", 0, np.array([-0.5, 0.0, 1e-3]), h=1e-4, relative_step=1e-3)
    assert c.step_at(0.5) == 1e-4
    assert c.step_at(1e-3) == pytest.approx(1e-6)
    assert c.step_at(0.0) == 1e-4
    assert c.singular.tolist() == [False, True, False]


@given(st.floats(1.1, 3.0), st.floats(0.1, 10.0))
def test_scaling_fit_recovers_power_law(theta, amp):
    sizes = [effective_size(k) for k in (1, 2, 3, 4)]
    fit = A.scaling_fit([amp * n**theta for n in sizes], sizes)
    assert fit.theta == pytest.approx(theta, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(amp), abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0)


def test_scaling_fit_rejects_short_input():
    with pytest.raises(ValueError):
        A.scaling_fit([1.0, float("nan"), 2.0], [5, 25, 125])
    with pytest.raises(ValueError):
        A.scaling_fit([1.0, 2.0], [5, 25, 125])


def test_scaling_grid_is_symmetric():
    g = A.scaling_grid(10)
    assert g.size == 20 and np.allclose(g, -g[::-1])
    assert np.all(np.diff(g) > 0)


def test_product_doublet_has_no_monogamy_excess():
    a = np.zeros(10)
    a[2] = a[5] = 1.0
    d = DoubletCoefficients.from_array(a)
    assert A.monogamy_concurrence(d) == (0.0, 0.0)
    assert A.monogamy_discord(d) == (0.0, 0.0)


def test_monogamy_at_isotropic_point():
    d = flow_coefficients(0.0, 0)
    d1, d2 = A.monogamy_concurrence(d)
    assert d1 == pytest.approx(math.sqrt(3) - 1, abs=1e-12)
    assert d2 == pytest.approx((1 + math.sqrt(3)) / 4, abs=1e-12)
    assert M.concurrence(rho12(d)) == pytest.approx(math.sin(math.pi / 12), abs=1e-12)


@given(st.floats(0.0, 1.0), st.integers(0, 2))
def test_monogamy_concurrence_nonnegative_and_even(gamma, step):
    plus = A.monogamy_concurrence(flow_coefficients(gamma, step))
    minus = A.monogamy_concurrence(flow_coefficients(-gamma, step))
    assert min(plus) >= -1e-12
    assert np.allclose(plus, minus, atol=1e-10)


def test_monogamy_score_fields():
    s = A.monogamy_score(0.3, 1)
    assert s.gamma == 0.3 and s.qrg_step == 1
    assert s.Delta1 >= 0 and s.delta1 >= 0


def test_one_site_concurrence_rejects_negative_determinant():
    class Fake:
        matrix = np.diag([1.5, -0.5])

    with pytest.raises(ValueError):
        A.one_site_concurrence(Fake())


def test_mutual_crossings_ignores_plateaus_and_edges():
    g = np.linspace(-1, 1, 9)
    a = np.array([0, 0, 0, -1, 0, 1, 2, 2, 2], float)
    b = np.array([0, 0, 0, 1, 0, -1, 3, 3, 2], float)
    rep = A.mutual_crossings(g, [a, b])
    assert rep.meeting_points == (0.0,)
    assert A.mutual_crossings(g, [a, b], interior=False).meeting_points == (0.0, 1.0)


def test_sign_change_crossings():
    g = np.linspace(0, 1, 11)
    assert A.sign_change_crossings(g, g, 0.55 * np.ones(11)) == pytest.approx([0.55])
    assert A.sign_change_crossings(g, g, g) == []
    assert A.grid_resolution(g) == pytest.approx(0.1)
