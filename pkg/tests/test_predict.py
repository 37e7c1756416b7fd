import numpy as np
import pytest

from excessmort.design import ModelSpec
from excessmort.errors import ContextError, LeakageError, WindowError
from excessmort.inference import PosteriorDraws, Prior, SamplerConfig, fit_model
from excessmort.predict import (
    ExcessEstimate,
    PredictiveDistribution,
    check_no_leakage,
    excess,
    excess_draws,
    month_range,
    posterior_predict,
    prediction_errors,
    round_to,
    years_before,
)

from conftest import make_series


def point_draws(spec, coef, sigma, rho=None, n=500, fit_years=(2010, 2011)):
    """Draws that all sit at one parameter vector."""
    row = list(coef) + [sigma] + ([rho] if spec.ar1 else [])
    values = np.tile(np.asarray(row, dtype=float), (2, n, 1))
    return PosteriorDraws(values, tuple(spec.param_names()), spec, SamplerConfig(seed=0), Prior(), tuple(fit_years))


def hand_pred(draws, targets, fit_years=(2010,)):
    draws = np.asarray(draws, dtype=float)
    return PredictiveDistribution(tuple(targets), draws, draws, "Model 1", tuple(fit_years), 0, "observed")


@pytest.mark.parametrize("x, unit, out", [(594, 10, 590), (595, 10, 600), (-595, 10, -590), (-596, 10, -600), (1234, 100, 1200)])
def test_round_to(x, unit, out):
    assert round_to(x, unit) == out


def test_month_range_crosses_year():
    assert month_range((2017, 11), (2018, 2)) == [(2017, 11), (2017, 12), (2018, 1), (2018, 2)]
    with pytest.raises(WindowError):
        month_range((2017, 3), (2017, 2))


def test_excess_on_known_draws():
    targets = [(2017, 9), (2017, 10)]
    pred = hand_pred(np.column_stack([np.arange(100.0), np.arange(100.0)]), targets)
    obs = make_series([200, 300], (2017, 9))
    est = excess(pred, obs, targets)
    total = (200 - np.arange(100.0)) + (300 - np.arange(100.0))
    assert est.central == pytest.approx(total.mean())
    assert est.ui95 == pytest.approx(tuple(np.quantile(total, [0.025, 0.975])))
    assert np.array_equal(excess_draws(pred, obs, targets), total)


def test_monthwise_interval_is_never_narrower(rng):
    targets = month_range((2017, 9), (2017, 12))
    pred = hand_pred(rng.normal(2500, 100, (4000, 4)), targets)
    obs = make_series([2900, 3000, 2700, 2800], (2017, 9))
    a = excess(pred, obs, targets)
    b = excess(pred, obs, targets, interval="monthwise")
    assert a.central == b.central
    assert b.ui95[1] - b.ui95[0] >= a.ui95[1] - a.ui95[0]
    # independent months: summed bounds are about twice the width of the sum's bounds
    assert (b.ui95[1] - b.ui95[0]) / (a.ui95[1] - a.ui95[0]) == pytest.approx(2.0, rel=0.1)
    with pytest.raises(ValueError):
        excess(pred, obs, targets, interval="other")


def test_estimate_round_trip_and_display():
    est = ExcessEstimate(((2017, 9),), 594.9, (500.0, 700.0), (300.0, 895.0), model="Model 3", interval="monthwise")
    assert ExcessEstimate.from_dict(est.to_dict()) == est
    assert est.row() == "590 / 500;700 / 300;900"


def test_leakage_guard():
    check_no_leakage([2010, 2016], [(2017, 9)])
    with pytest.raises(LeakageError):
        check_no_leakage([2016, 2017], [(2017, 9)])
    pred = hand_pred(np.zeros((10, 1)), [(2017, 9)], fit_years=(2017,))
    with pytest.raises(LeakageError):
        excess(pred, make_series([1], (2017, 9)), [(2017, 9)])


def test_years_before(series):
    assert years_before(series, [(2017, 9)]) == list(range(2010, 2017))


def test_window_errors():
    pred = hand_pred(np.zeros((10, 1)), [(2017, 9)])
    obs = make_series([1], (2017, 9))
    with pytest.raises(WindowError):
        excess(pred, obs, [])
    with pytest.raises(WindowError):
        excess(pred, obs, [(2017, 10)])
    with pytest.raises(WindowError):
        pred.column(2017, 10)


def test_iid_predictive_matches_parameters():
    spec = ModelSpec(2)
    coef = [2500.0] + [0.0] * 7 + [100.0] + [0.0] * 3
    pred = posterior_predict(point_draws(spec, coef, 50.0, n=5000), [(2017, 9)], make_series([0]), seed=1)
    col = pred.column(2017, 9)
    assert col.mean() == pytest.approx(2600, abs=3)
    assert col.std() == pytest.approx(50, rel=0.05)


def test_ar1_observed_conditioning_uses_previous_residual():
    spec = ModelSpec(3)
    coef = [1000.0] + [0.0] * 11
    draws = point_draws(spec, coef, 10.0, 0.5)
    ctx = make_series([1100], (2017, 8))
    pred = posterior_predict(draws, [(2017, 9)], ctx, seed=2)
    assert np.allclose(pred.expected, 1050.0)
    assert pred.draws.std() == pytest.approx(10, rel=0.1)


def test_ar1_without_context_opens_stationary():
    spec = ModelSpec(3)
    draws = point_draws(spec, [1000.0] + [0.0] * 11, 10.0, 0.8, n=5000)
    pred = posterior_predict(draws, [(2017, 9)], make_series([1], (2010, 1)), seed=3)
    assert pred.draws.std() == pytest.approx(10 / np.sqrt(1 - 0.64), rel=0.05)


def test_simulated_conditioning_chains_targets():
    spec = ModelSpec(3)
    draws = point_draws(spec, [1000.0] + [0.0] * 11, 10.0, 0.9, n=5000)
    ctx = make_series([1500, 1500], (2017, 8))
    obs = posterior_predict(draws, [(2017, 9), (2017, 10)], ctx, seed=4)
    sim = posterior_predict(draws, [(2017, 9), (2017, 10)], ctx, seed=4, conditioning="simulated")
    # with observed conditioning October restarts from September's observed value
    assert obs.expected[:, 1].mean() == pytest.approx(1450)
    # simulated runs open from the stationary error and chain October on September's draw
    assert np.allclose(sim.expected[:, 0], 1000.0)
    np.testing.assert_allclose(sim.expected[:, 1], 1000 + 0.9 * (sim.draws[:, 0] - 1000))
    with pytest.raises(ValueError):
        posterior_predict(draws, [(2017, 9)], ctx, conditioning="other")


def test_dynamic_model_needs_lag_context():
    spec = ModelSpec(4)
    draws = point_draws(spec, [100.0, 0.9, 50.0, 0.0], 10.0)
    pred = posterior_predict(draws, [(2017, 9)], make_series([2000], (2017, 8)), seed=5)
    assert np.allclose(pred.expected, 100 + 0.9 * 2000 + 50)
    with pytest.raises(ContextError):
        posterior_predict(draws, [(2017, 9)], make_series([2000], (2017, 1)))


def test_prediction_errors(baseline_series, series, fast_config):
    draws = fit_model(baseline_series, ModelSpec(2), config=fast_config)
    pred = posterior_predict(draws, [(2017, m) for m in range(1, 13)], series)
    errs = prediction_errors(pred, series, [(2017, 9), (2017, 10)])
    assert len(errs) == 2 and errs[0] > 200
    assert pred.seed == fast_config.seed + 1


def test_wider_level_never_narrows(rng):
    pred = hand_pred(rng.normal(0, 1, (2000, 3)), [(2017, m) for m in (1, 2, 3)])
    lo50, hi50 = pred.interval(0.5)
    lo95, hi95 = pred.interval(0.95)
    assert np.all(lo95 <= lo50) and np.all(hi50 <= hi95)


def test_window_excess_is_additive(rng):
    targets = [(2017, 9), (2017, 10)]
    pred = hand_pred(rng.normal(2500, 100, (1000, 2)), targets)
    obs = make_series([2900, 3000], (2017, 9))
    both = excess(pred, obs, targets).central
    parts = excess(pred, obs, targets[:1]).central + excess(pred, obs, targets[1:]).central
    assert both == pytest.approx(parts)


def test_interval_collapses_without_noise():
    spec = ModelSpec(1)
    draws = point_draws(spec, [2500.0], 1e-9)
    pred = posterior_predict(draws, [(2017, 9)], make_series([0]), seed=6)
    est = excess(pred, make_series([2900], (2017, 9)), [(2017, 9)])
    assert est.ui95[0] == pytest.approx(400, abs=1e-6) and est.ui95[1] == pytest.approx(400, abs=1e-6)


def test_display_rounding_stays_within_half_unit(rng):
    for x in rng.uniform(-5000, 5000, 200):
        assert abs(x - round_to(x, 10)) <= 5
