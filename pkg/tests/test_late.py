from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from late_bounds.errors import NonInvertibleTransform, NonPositiveThreshold, ZeroDenominator, ZeroInstrument
from late_bounds.late import (
    bounds,
    c_factor,
    engagement_for_effect_threshold,
    gamma_for_xi_threshold,
    late_estimate,
    late_grid,
    xi,
)
from late_bounds.transform import TransformSpec

ID = TransformSpec.identity()
ITT, MU = -0.761, 0.814


def test_c_factor_examples():
    assert c_factor(1.0, 0.3, 0.6) == 1.0
    assert c_factor(0.5, 0.0, 0.814) == pytest.approx(0.5 / 0.907)
    assert c_factor(0.0, 0.6, 0.6) == 1.0
    with pytest.raises(ZeroDenominator):
        c_factor(0.0, 0.5, 0.0)


@pytest.mark.parametrize("gamma, expected", [(0.25, -0.22), (0.5, -0.42), (0.75, -0.60)])
def test_nece_worked_example(gamma, expected):
    assert late_estimate(ITT, MU, gamma, ID, 0.0).delta == pytest.approx(expected, abs=0.005)


def test_gamma_one_and_convention():
    for a in (0.0, 0.3, 1.0):
        assert late_estimate(ITT, MU, 1.0, ID, a).delta == ITT
    pt = late_estimate(ITT, MU, 0.0, ID, 0.0)
    assert pt.delta == 0.0 and pt.convention


def test_bounds_examples():
    lo, hi = bounds(ITT, MU, ID, 1.0)
    assert lo == pytest.approx(-0.935, abs=5e-4) and hi == ITT
    assert bounds(ITT, MU, ID, MU) == (ITT, ITT)
    assert bounds(0.0, MU, ID, 0.3) == (0.0, 0.0)
    with pytest.raises(ZeroInstrument):
        bounds(ITT, 0.0, ID, 0.5)


def test_xi_examples():
    assert xi(ITT, MU, 1.0).xi == 0.0
    assert xi(ITT, MU, 0.0).xi == pytest.approx(ITT / MU)
    assert abs(xi(ITT, MU, 0.690).xi) == pytest.approx(0.25, abs=0.002)


def test_gamma_star():
    assert gamma_for_xi_threshold(ITT, MU, 0.25) == pytest.approx(0.690, abs=0.001)
    assert gamma_for_xi_threshold(ITT, MU, abs(ITT) / MU) is None
    assert gamma_for_xi_threshold(ITT, MU, 1e-9) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(NonPositiveThreshold):
        gamma_for_xi_threshold(ITT, MU, 0.0)


def test_a_star():
    res = engagement_for_effect_threshold(ITT, MU, 0.5, ID, 0.5)
    assert res.status == "solved" and res.a_star == pytest.approx(0.192, abs=0.001)
    assert engagement_for_effect_threshold(ITT, MU, 0.75, ID, 0.5).status == "always"
    assert engagement_for_effect_threshold(ITT, MU, 0.3, ID, abs(ITT)).a_star == pytest.approx(MU)
    assert engagement_for_effect_threshold(ITT, MU, 0.0, ID, 2.0).status == "never"
    assert engagement_for_effect_threshold(ITT, MU, 1.0, ID, 0.5).status == "always"
    assert engagement_for_effect_threshold(ITT, MU, 1.0, ID, 0.9).status == "never"


def test_a_star_threshold_transform():
    spec = TransformSpec.threshold(0.6)
    res = engagement_for_effect_threshold(ITT, 0.7, 0.2, spec, 0.5)
    assert res.a_star == 0.6 and not res.unique
    with pytest.raises(NonInvertibleTransform):
        engagement_for_effect_threshold(ITT, 0.7, 0.2, spec, 0.5, strict=True)


@given(st.floats(0.05, 3.0), st.floats(0.05, 1.0), st.floats(0.01, 2.0))
def test_gamma_star_matches_bisection(d, mu, t):
    closed = gamma_for_xi_threshold(-d, mu, t)

    def f(g):
        return abs(xi(-d, mu, g).xi) - t

    if f(0.0) <= 0:
        assert closed is None
    else:
        assert closed == pytest.approx(brentq(f, 0.0, 1.0, xtol=1e-14), abs=1e-9)


@given(st.floats(0.05, 3.0), st.floats(0.05, 1.0), st.floats(0.0, 0.99), st.floats(0.01, 2.0))
def test_a_star_matches_bisection(d, mu, gamma, t):
    res = engagement_for_effect_threshold(d, mu, gamma, ID, t)

    def f(a):
        return abs(late_estimate(d, mu, gamma, ID, a).delta) - t

    if f(0.0) >= 0 and res.status == "always":
        return
    if f(1.0) < 0:
        assert res.status == "never"
        return
    if res.status == "always":  # boundary rounding at a = 0
        assert f(0.0) == pytest.approx(0.0, abs=1e-9)
        return
    assert res.a_star == pytest.approx(brentq(f, 0.0, 1.0, xtol=1e-14), abs=1e-8)


itt_vals = st.floats(-5, 5).filter(lambda v: abs(v) > 1e-6)
mu_vals = st.floats(0.01, 1.0)


@given(itt_vals, mu_vals)
def test_stationarity(d, mu):
    for g in np.linspace(0, 1, 101):
        assert late_estimate(d, mu, g, ID, mu).delta == pytest.approx(d, rel=1e-10, abs=1e-12)


@given(itt_vals, mu_vals, st.floats(0, 1))
def test_sign_monotone_envelope(d, mu, gamma):
    grid = np.linspace(0, 1, 21)
    pts = [late_estimate(d, mu, gamma, ID, a) for a in grid]
    mags = [abs(p.delta) for p in pts]
    assert all(m2 >= m1 - 1e-12 for m1, m2 in zip(mags, mags[1:]))
    for p in pts:
        if not p.convention and p.delta != 0:
            assert np.sign(p.delta) == np.sign(d)
        assert p.lower_bound - 1e-10 <= p.delta <= p.upper_bound + 1e-10


@given(itt_vals, mu_vals, st.floats(0, 1))
def test_xi_product_equals_difference(d, mu, gamma):
    diff = late_estimate(d, mu, gamma, ID, 1.0).delta - late_estimate(d, mu, gamma, ID, 0.0).delta
    assert xi(d, mu, gamma).xi == pytest.approx(diff, abs=1e-10)


@given(st.floats(-5, -1e-6), mu_vals)
def test_ordering_chain_negative_itt(d, mu):
    for g in (0.0, 0.3, 0.7):
        d0 = late_estimate(d, mu, g, ID, 0.0).delta
        d1 = late_estimate(d, mu, g, ID, 1.0).delta
        assert d1 <= d + 1e-12 <= d0 + 2e-12 <= 2e-12


def test_grid_sorted():
    pts = late_grid(ITT, MU, (1, 0, 0.5), (1, 0))
    assert [(p.gamma, p.a) for p in pts] == [(0, 0), (0, 1), (0.5, 0), (0.5, 1), (1, 0), (1, 1)]
