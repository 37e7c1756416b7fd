import math

import numpy as np
import pytest
from scipy.linalg import toeplitz
from scipy.stats import multivariate_normal, t as student_t

from excessmort.design import DesignMatrix, ModelSpec, build_design
from excessmort.inference import (
    LogPosterior,
    ParameterDraw,
    Prior,
    gaussian_ar1_loglik,
    grad_log_posterior,
    log_likelihood,
    log_posterior,
)
from excessmort.inference.density import student_t_logpdf


def toeplitz_logpdf(e, sigma, rho):
    n = len(e)
    cov = sigma**2 / (1 - rho**2) * toeplitz(rho ** np.arange(n))
    return multivariate_normal(np.zeros(n), cov).logpdf(e)


def test_ar1_matches_toeplitz(rng):
    for _ in range(50):
        n = int(rng.integers(1, 9))
        e = rng.normal(0, 3, n)
        sigma = rng.uniform(0.1, 10)
        rho = rng.uniform(-0.95, 0.95)
        assert gaussian_ar1_loglik(e, sigma, rho) == pytest.approx(toeplitz_logpdf(e, sigma, rho), abs=1e-8)


def test_segments_are_independent(rng):
    e = rng.normal(size=7)
    starts = np.array([1, 0, 0, 1, 0, 0, 0], dtype=bool)
    joint = gaussian_ar1_loglik(e, 1.3, 0.6, starts)
    split = toeplitz_logpdf(e[:3], 1.3, 0.6) + toeplitz_logpdf(e[3:], 1.3, 0.6)
    assert joint == pytest.approx(split, abs=1e-10)


def test_rho_zero_is_iid_normal(rng):
    e = rng.normal(size=10)
    expected = -5 * math.log(2 * math.pi) - 10 * math.log(2.0) - 0.5 * np.sum(e**2) / 4
    assert gaussian_ar1_loglik(e, 2.0, 0.0) == pytest.approx(expected)


def test_parameter_validation():
    with pytest.raises(ValueError):
        ParameterDraw([1.0], 0.0)
    with pytest.raises(ValueError):
        ParameterDraw([1.0], 1.0, rho=1.0)
    with pytest.raises(ValueError):
        Prior(scale=0)


def test_student_t_logpdf_matches_scipy():
    x = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(student_t_logpdf(x, 3, 0.5, 2.0), student_t.logpdf(x, 3, 0.5, 2.0))


def _fd_grad(post, q, h=1e-5):
    g = np.empty_like(q)
    for j in range(len(q)):
        a, b = q.copy(), q.copy()
        a[j] += h
        b[j] -= h
        g[j] = (post.logp(a)[0] - post.logp(b)[0]) / (2 * h)
    return g


@pytest.mark.parametrize("kind", [1, 2, 3, 4])
def test_gradient_matches_finite_differences(kind, baseline_series, rng):
    spec = ModelSpec(kind)
    post = LogPosterior(build_design(baseline_series, spec), Prior.diffuse(), spec.ar1)
    for _ in range(5):
        q = rng.uniform(-1.5, 1.5, post.dim)
        g = post.logp_grad(q)[1][0]
        np.testing.assert_allclose(g, _fd_grad(post, q), rtol=1e-5, atol=1e-4)


def test_informative_prior_gradient(baseline_series, rng):
    spec = ModelSpec(3)
    prior = Prior(informative={"intercept": (2600.0, 50.0), "sep": (-200.0, 80.0)})
    post = LogPosterior(build_design(baseline_series, spec), prior, True)
    q = rng.uniform(-1, 1, post.dim)
    np.testing.assert_allclose(post.logp_grad(q)[1][0], _fd_grad(post, q), rtol=1e-5, atol=1e-4)


def test_informative_prior_unknown_name(baseline_series):
    with pytest.raises(ValueError):
        LogPosterior(build_design(baseline_series, ModelSpec(2)), Prior(informative={"lag": (0, 1)}), False)


def test_transform_round_trip(baseline_series):
    spec = ModelSpec(3)
    post = LogPosterior(build_design(baseline_series, spec), Prior.diffuse(), True)
    params = ParameterDraw(np.linspace(2500, 2400, 12), 97.0, -0.3)
    back = post.from_unconstrained(post.to_unconstrained(params))
    np.testing.assert_allclose(back.coef, params.coef)
    assert back.sigma == pytest.approx(97.0) and back.rho == pytest.approx(-0.3)


def test_posterior_is_likelihood_plus_prior(baseline_series):
    # differences between two parameter sets: likelihood part must match exactly under a flat prior
    spec = ModelSpec(2)
    design = build_design(baseline_series, spec)
    a = ParameterDraw(np.r_[2590.0, np.zeros(11)], 120.0)
    b = ParameterDraw(np.r_[2500.0, np.full(11, -50.0)], 130.0)
    flat = Prior.flat(1e9)
    post_diff = log_posterior(a, design, flat, False) - log_posterior(b, design, flat, False)
    # the sigma Jacobian adds log(sigma_a / sigma_b) under a flat prior in sigma
    lik_diff = log_likelihood(a, design, False) - log_likelihood(b, design, False) + math.log(120 / 130)
    assert post_diff == pytest.approx(lik_diff, abs=1e-6)


def test_public_gradient_helper(baseline_series):
    spec = ModelSpec(1)
    design = build_design(baseline_series, spec)
    g = grad_log_posterior(ParameterDraw([2400.0], 150.0), design, Prior.diffuse(), False)
    assert g.shape == (2,) and np.all(np.isfinite(g))


def test_log_posterior_non_finite_is_minus_inf():
    design = DesignMatrix(np.array([1.0, 2.0, 3.0]), np.ones((3, 1)), ("intercept",), ((2010, 1), (2010, 2), (2010, 3)))
    assert log_posterior(ParameterDraw([1e308], 1e-300), design, Prior.diffuse(), False) == -math.inf
