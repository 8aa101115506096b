from __future__ import annotations

import numpy as np
import pytest

from late_bounds.errors import TooManyDegenerateResamples, ZeroVariance
from late_bounds.estimators import IttEstimate, MuHEstimate, estimate_itt, mu_h_estimate, quartile_knots
from late_bounds.inference import (
    ReplicateEngine,
    ReportPlan,
    bootstrap,
    quantile_ci,
    var_c,
    var_late,
    wald,
)
from late_bounds.late import late_estimate, xi
from late_bounds.model import Adjustment, AnalysisConfig, SplineTerm, dataset_from_arrays
from late_bounds.simulate import gen_dataset
from late_bounds.transform import TransformSpec


def test_var_c_examples():
    mu = MuHEstimate(0.5, 0.04, 100, 200)
    assert var_c(1.0, 0.3, mu) == 0.0
    assert var_c(0.4, 0.3, MuHEstimate(0.5, 0.0, 100, 200)) == 0.0
    assert var_c(0.0, 1.0, mu) == pytest.approx(0.64)


def test_var_c_resampling_oracle():
    # c_hat = 1 / mean(h) at gamma = 0, h(a) = 1; arm of n1 = n / 2 subjects
    rng = np.random.default_rng(2024)
    n = 2000
    n1 = n // 2
    # h with mean 0.5 and variance 0.02, so sigma2_h = (n / n1) * 0.02 = 0.04
    h = rng.choice([0.5 - np.sqrt(0.02), 0.5 + np.sqrt(0.02)], size=(100_000, n1))
    c_hat = 1.0 / h.mean(axis=1)
    assert n * c_hat.var() == pytest.approx(var_c(0.0, 1.0, MuHEstimate(0.5, 0.04, n1, n)), rel=0.02)


def test_var_late_gamma_one_collapse():
    itt = IttEstimate(-0.7, 3.0, "diff_means", 300)
    mu = MuHEstimate(0.6, 0.5, 150, 300)
    for h in (0.0, 0.4, 1.0):
        vb = var_late(itt, mu, 1.0, h)
        assert vb.tau2 == itt.sigma2_itt
        assert vb.se_late == pytest.approx(itt.se, rel=1e-15)


def test_tau2_recomposition():
    itt = IttEstimate(-0.761, 3.7, "diff_means", 215)
    mu = MuHEstimate(0.814, 0.12, 109, 215)
    for g in (0.0, 0.3, 0.8):
        for h in (0.2, 0.814, 1.0):
            vb = var_late(itt, mu, g, h)
            expected = vb.c**2 * itt.sigma2_itt + itt.delta_itt**2 * vb.sigma2_c
            assert vb.tau2 == pytest.approx(expected, rel=1e-12)


def test_wald():
    w = wald(0.0, 2.0, 100)
    assert w.statistic == 0.0 and w.p_value == 1.0
    assert wald(np.sqrt(3.841), 1.0, 1).p_value == pytest.approx(0.05, abs=0.001)
    with pytest.raises(ZeroVariance):
        wald(1.0, 0.0, 10)


def test_quantile_ci_integer_sequence():
    lo, hi = quantile_ci(np.arange(1, 501)[:, None], 0.95)
    assert lo[0] == pytest.approx(13.475) and hi[0] == pytest.approx(487.525)


def test_report_plan_labels():
    plan = ReportPlan((0.0, 0.5), (0.0, 1.0))
    assert plan.labels == [
        "itt",
        "mu_h",
        "delta[gamma=0,a=0]",
        "delta[gamma=0,a=1]",
        "delta[gamma=0.5,a=0]",
        "delta[gamma=0.5,a=1]",
        "xi[gamma=0]",
        "xi[gamma=0.5]",
    ]
    assert plan.labels[plan.delta_index(1, 0)] == "delta[gamma=0.5,a=0]"
    assert plan.labels[plan.xi_index(1)] == "xi[gamma=0.5]"


def test_constant_outcome_bootstrap():
    z = np.r_[np.ones(20), np.zeros(20)]
    a = np.r_[np.linspace(0.1, 1, 20), np.zeros(20)]
    data = dataset_from_arrays(z, a, np.full(40, 5.0))
    res = bootstrap(data, AnalysisConfig(bootstrap_reps=50))
    itt = res.get("itt")
    assert itt["ci_lower"] == 0.0 and itt["ci_upper"] == 0.0
    assert np.all(res.replicates[:, 0] == 0.0)


@pytest.mark.parametrize("method, adjustment", [("diff_means", Adjustment()), ("ols_adjusted", Adjustment((), (SplineTerm("l"),)))])
def test_engine_matches_scalar_pipeline(worked_data, method, adjustment):
    """Each replicate equals the plain estimators run on the resampled dataset."""
    if adjustment:
        adjustment = Adjustment((), (SplineTerm("l", quartile_knots(worked_data.column("l"))),))
    plan = ReportPlan((0.0, 0.4, 1.0), (0.0, 0.3, 1.0))
    engine = ReplicateEngine(worked_data, plan, transform=TransformSpec(), itt_method=method, adjustment=adjustment)
    rng = np.random.default_rng(5)
    idx = rng.integers(0, worked_data.n, size=(4, worked_data.n))
    values, ok = engine.evaluate(idx)
    assert ok.all()
    for r in range(4):
        sub = worked_data.take(idx[r])
        itt = estimate_itt(sub, method, adjustment)
        mu = mu_h_estimate(sub)
        expected = [itt.delta_itt, mu.mu_h]
        expected += [late_estimate(itt, mu, g, TransformSpec(), a).delta for g in plan.gamma_grid for a in plan.a_grid]
        expected += [xi(itt, mu, g).xi for g in plan.gamma_grid]
        np.testing.assert_allclose(values[r], expected, rtol=1e-9, atol=1e-12)


def test_bootstrap_deterministic_across_workers(sim_data):
    config = AnalysisConfig(bootstrap_reps=400, seed=99, itt_method="ols_adjusted", adjustment=Adjustment(("l",)))
    one = bootstrap(sim_data, config, workers=1)
    eight = bootstrap(sim_data, config, workers=8)
    assert one.replicates.tobytes() == eight.replicates.tobytes()
    assert one.ci_lower.tobytes() == eight.ci_lower.tobytes()
    again = bootstrap(sim_data, config, workers=3)
    assert again.replicates.tobytes() == one.replicates.tobytes()


def test_bootstrap_shape_and_levels(sim_data):
    res95 = bootstrap(sim_data, AnalysisConfig(bootstrap_reps=300, ci_level=0.95, seed=1))
    res90 = bootstrap(sim_data, AnalysisConfig(bootstrap_reps=300, ci_level=0.90, seed=1))
    assert res95.n_replicates == 300
    assert res95.replicates.shape == (300, len(res95.labels))
    assert np.all(res95.ci_lower <= res95.ci_upper)
    assert np.all(res95.ci_lower <= res90.ci_lower) and np.all(res90.ci_upper <= res95.ci_upper)


def test_bootstrap_se_tracks_delta_method(sim_spec):
    data, _ = gen_dataset(sim_spec.replace(n=1000), seed=3)
    itt = estimate_itt(data)
    mu = mu_h_estimate(data)
    res = bootstrap(data, AnalysisConfig(gamma_grid=(0.5,), a_grid=(0.0, 1.0), bootstrap_reps=500, seed=4))
    for a in (0.0, 1.0):
        se = var_late(itt, mu, 0.5, a).se_late
        assert res.get(f"delta[gamma=0.5,a={a:g}]")["se_boot"] == pytest.approx(se, rel=0.15)


def test_redraws_counted_and_capped():
    # one treated subject in 30: an empty treated arm has probability (29/30)^30 ~ 0.36
    z = np.r_[1.0, np.zeros(29)]
    a = np.r_[0.8, np.zeros(29)]
    y = np.arange(30.0)
    data = dataset_from_arrays(z, a, y)
    with pytest.raises(TooManyDegenerateResamples):
        bootstrap(data, AnalysisConfig(bootstrap_reps=100))
    # five treated subjects: (25/30)^30 ~ 0.004, so a few redraws and no error
    z = np.r_[np.ones(5), np.zeros(25)]
    a = np.r_[np.full(5, 0.8), np.zeros(25)]
    res = bootstrap(dataset_from_arrays(z, a, y), AnalysisConfig(bootstrap_reps=2000))
    assert 0 < res.redraws <= 200
