"""Bayesian fitting: densities, the HMC sampler and convergence diagnostics."""

from .density import (
    LogPosterior,
    ParameterDraw,
    Prior,
    gaussian_ar1_loglik,
    grad_log_posterior,
    log_likelihood,
    log_posterior,
)
from .diagnostics import ess, mcse_mean, rhat
from .fitting import PosteriorDraws, check_draws, derive_informative_prior, fit_model, sample_hmc
from .hmc import SamplerConfig, derive_seed, run_hmc

__all__ = [
    "LogPosterior",
    "ParameterDraw",
    "PosteriorDraws",
    "Prior",
    "SamplerConfig",
    "check_draws",
    "derive_informative_prior",
    "derive_seed",
    "ess",
    "fit_model",
    "gaussian_ar1_loglik",
    "grad_log_posterior",
    "log_likelihood",
    "log_posterior",
    "mcse_mean",
    "rhat",
    "run_hmc",
    "sample_hmc",
]
