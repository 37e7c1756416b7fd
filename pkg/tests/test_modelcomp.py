import json

import numpy as np
import pytest
from scipy.stats import norm, t as student_t

from excessmort.design import ModelSpec, build_design
from excessmort.inference import PosteriorDraws, Prior, SamplerConfig, fit_model
from excessmort.modelcomp import (
    FitSummary,
    LooResult,
    comparison_table,
    fitted_values,
    heldout_logdensity,
    loo_ic,
    rmse,
    summarize_fit,
)

from conftest import make_series


def point_draws(spec, row, fit_years=(2010,)):
    values = np.tile(np.asarray(row, dtype=float), (2, 50, 1))
    return PosteriorDraws(values, tuple(spec.param_names()), spec, SamplerConfig(), Prior(), tuple(fit_years))


def test_rmse_of_exact_parameters_is_zero():
    s = make_series([1000 + 10 * (k % 12) for k in range(24)])
    spec = ModelSpec(2)
    draws = point_draws(spec, [1000.0] + [10.0 * k for k in range(1, 12)] + [5.0])
    assert rmse(draws, build_design(s, spec)) == pytest.approx(0.0, abs=1e-9)


def test_rmse_by_hand():
    s = make_series([10, 14, 8, 12] + [10] * 8)
    spec = ModelSpec(1)
    draws = point_draws(spec, [10.0, 1.0])
    assert rmse(draws, build_design(s, spec)) == pytest.approx(np.sqrt((16 + 4 + 4) / 12))


def test_conditional_fitted_values_add_ar1_shift():
    s = make_series([10, 14, 8, 12] + [10] * 20)
    spec = ModelSpec(3)
    draws = point_draws(spec, [10.0] + [0.0] * 11 + [1.0, 0.5])
    design = build_design(s, spec)
    cond = fitted_values(draws, design)
    reg = fitted_values(draws, design, "regression")
    np.testing.assert_allclose(reg, 10.0)
    # the first month has no predecessor in the sample
    np.testing.assert_allclose(cond[:5], [10, 10, 12, 9, 11])
    with pytest.raises(ValueError):
        fitted_values(draws, design, "other")


def test_heldout_density_iid():
    s = make_series([10, 13, 10] + [10] * 9)
    spec = ModelSpec(1)
    draws = point_draws(spec, [10.0, 2.0])
    got = heldout_logdensity(draws, s, (2010, 2), set())
    assert got == pytest.approx(norm.logpdf(13, 10, 2))


def test_heldout_density_ar1_neighbours():
    s = make_series([12, 15, 11] + [10] * 9)
    spec = ModelSpec(3)
    rho, sigma = 0.5, 2.0
    draws = point_draws(spec, [10.0] + [0.0] * 11 + [sigma, rho])
    both = heldout_logdensity(draws, s, (2010, 2), {(2010, 1), (2010, 3)})
    loc = 10 + rho * (2 + 1) / (1 + rho**2)
    assert both == pytest.approx(norm.logpdf(15, loc, sigma / np.sqrt(1 + rho**2)))
    one = heldout_logdensity(draws, s, (2010, 2), {(2010, 1)})
    assert one == pytest.approx(norm.logpdf(15, 10 + rho * 2, sigma))
    none = heldout_logdensity(draws, s, (2010, 2), set())
    assert none == pytest.approx(norm.logpdf(15, 10, sigma / np.sqrt(1 - rho**2)))


def test_heldout_both_neighbours_matches_gaussian_conditioning():
    # the closed form must equal conditioning the stationary AR(1) joint on its neighbours
    rho, sigma = -0.4, 3.0
    cov = sigma**2 / (1 - rho**2) * rho ** np.abs(np.subtract.outer(np.arange(3), np.arange(3)))
    e = np.array([1.5, 0.0, -2.0])
    idx = [0, 2]
    w = np.linalg.solve(cov[np.ix_(idx, idx)], cov[idx, 1])
    cond_mean = w @ e[idx]
    cond_var = cov[1, 1] - cov[1, idx] @ w
    assert cond_mean == pytest.approx(rho * (e[0] + e[2]) / (1 + rho**2))
    assert cond_var == pytest.approx(sigma**2 / (1 + rho**2))


def test_loo_matches_student_t_oracle():
    # flat priors on coefficients and sigma: the held-out predictive is Student t
    y = np.array([1012, 987, 1040, 995, 1003, 968, 1021, 1009, 977, 1030, 990, 1015], dtype=float)
    s = make_series(y)
    config = SamplerConfig(n_chains=4, n_iterations=3000, n_warmup=1000, seed=21)
    res = loo_ic(s, ModelSpec(1), prior=Prior.flat(), config=config)
    oracle = []
    for i in range(len(y)):
        train = np.delete(y, i)
        n = len(train)
        nu = n - 2
        scale = np.sqrt(((train - train.mean()) ** 2).sum() / nu * (1 + 1 / n))
        oracle.append(student_t.logpdf(y[i], nu, train.mean(), scale))
    np.testing.assert_allclose(res.pointwise, oracle, atol=0.05)
    assert res.value == pytest.approx(-2 * np.sum(oracle), abs=0.5)
    assert res.se == pytest.approx(np.sqrt(len(y) * np.var(-2 * np.array(oracle), ddof=1)), rel=0.05)


def test_loo_result_and_summary_round_trip(baseline_series, fast_config):
    draws = fit_model(baseline_series, ModelSpec(3), config=fast_config)
    design = build_design(baseline_series, ModelSpec(3))
    loo = LooResult(1000.0, 20.0, (-1.0, -2.0), ("w",))
    summary = summarize_fit(draws, design, loo)
    back = FitSummary.from_dict(json.loads(summary.to_json()))
    assert back == summary
    assert summary.n == 84 and summary.rmse > 0
    table = comparison_table([summary])
    assert "RMSE" in table and "LOO-IC" in table and "rho" in table


def test_negative_rmse_rejected():
    with pytest.raises(ValueError):
        FitSummary("Model 1", 1, {}, -1.0)
