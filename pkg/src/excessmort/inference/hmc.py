"""Multi-chain Hamiltonian Monte Carlo with step-size and diagonal-metric adaptation.

Each chain runs from its own spawned seed with its own step size,
diagonal metric and jittered trajectory length; draws depend only on
(seed, config, data).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._kernels import _kinetic, logp_grad_row, trajectory
from .density import LogPosterior


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 4
    n_iterations: int = 2000
    n_warmup: int = 1000
    seed: int = 20170920
    target_acceptance: float = 0.8
    n_leapfrog: int = 32
    jitter: float = 0.2
    max_energy_error: float = 1000.0
    adapt_metric: bool = True
    metric: str = "dense"

    def __post_init__(self):
        if self.n_chains < 2:
            raise ValueError("need at least 2 chains (R-hat needs between-chain variance)")
        if not 0 <= self.n_warmup < self.n_iterations:
            raise ValueError("n_warmup must be non-negative and below n_iterations")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if self.n_leapfrog < 1:
            raise ValueError("n_leapfrog must be at least 1")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")
        if self.metric not in ("diag", "dense"):
            raise ValueError("metric must be 'diag' or 'dense'")

    @property
    def n_draws(self) -> int:
        return self.n_iterations - self.n_warmup

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(**d)

    def replace(self, **changes) -> "SamplerConfig":
        d = self.to_dict()
        d.update(changes)
        return SamplerConfig(**d)


@dataclass
class HMCResult:
    """Unconstrained draws plus per-chain sampler statistics."""

    q: np.ndarray  # (chains, draws, dim)
    divergent: np.ndarray  # (chains, draws) bool
    accept_stat: np.ndarray  # (chains, draws)
    step_size: np.ndarray  # (chains,)
    inv_metric: np.ndarray  # (chains, dim, dim)
    warmup_divergences: np.ndarray  # (chains,)


class _DualAveraging:
    """Nesterov dual averaging on log step size (Hoffman & Gelman 2014 constants)."""

    def __init__(self, eps: np.ndarray, target: float, gamma=0.05, t0=10.0, kappa=0.75):
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa
        self.restart(eps)

    def restart(self, eps: np.ndarray):
        self.mu = np.log(10.0 * eps)
        self.hbar = np.zeros_like(eps)
        self.log_eps_bar = np.zeros_like(eps)
        self.t = 0

    def update(self, accept_stat: np.ndarray) -> np.ndarray:
        self.t += 1
        t = self.t
        w = 1.0 / (t + self.t0)
        self.hbar = (1 - w) * self.hbar + w * (self.target - accept_stat)
        log_eps = self.mu - math.sqrt(t) / self.gamma * self.hbar
        eta = t ** (-self.kappa)
        self.log_eps_bar = eta * log_eps + (1 - eta) * self.log_eps_bar
        return np.exp(log_eps)

    def final(self) -> np.ndarray:
        return np.exp(self.log_eps_bar)


def _buffers(n_warmup: int) -> tuple[int, int, int]:
    init, term, base = 75, 50, 25
    if init + term + base > n_warmup:
        init, term = int(0.15 * n_warmup), int(0.1 * n_warmup)
        base = n_warmup - init - term
    return init, term, base


def _metric_windows(n_warmup: int) -> list[int]:
    """Iteration counts at which a slow metric-adaptation window closes."""
    if n_warmup < 20:
        return []
    init, term, base = _buffers(n_warmup)
    ends = []
    start, size = init, base
    last = n_warmup - term
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        ends.append(end)
        start = end
        size *= 2
    return ends


def _momentum(rng: np.random.Generator, chol_metric: np.ndarray) -> np.ndarray:
    return chol_metric @ rng.standard_normal(chol_metric.shape[0])


def _initial_step_size(model, q, lp, g, inv_metric, chol_metric, rng) -> float:
    """Double or halve the step until one leapfrog step crosses acceptance 0.5."""
    p = _momentum(rng, chol_metric)
    h0 = -lp + _kinetic(p, inv_metric)

    def log_accept(step):
        q1, p1, _, lp1, bad = trajectory(q, p, g, lp, step, inv_metric, 1, np.inf, model)
        d = h0 - (-lp1 + _kinetic(p1, inv_metric))
        return d if (not bad and np.isfinite(d)) else -math.inf

    eps = 1.0
    up = log_accept(eps) > math.log(0.5)
    for _ in range(60):
        eps = eps * 2.0 if up else eps * 0.5
        if (log_accept(eps) > math.log(0.5)) != up:
            break
    return eps


def _regularized_metric(cov: np.ndarray, n: int, dense: bool) -> np.ndarray:
    """Shrink a window covariance towards a small multiple of the identity."""
    if not dense:
        cov = np.diag(np.diag(cov))
    w = n / (n + 5.0)
    return w * cov + 1e-3 * (1.0 - w) * np.eye(len(cov))


def _run_chain(post: LogPosterior, config: SamplerConfig, rng: np.random.Generator):
    model = post.model
    d = post.dim
    dense = config.metric == "dense"
    g = np.empty(d)
    for _ in range(100):
        q = rng.uniform(-2.0, 2.0, d)
        lp = logp_grad_row(q, g, model)
        if np.isfinite(lp) and np.all(np.isfinite(g)):
            break
    else:
        raise RuntimeError("could not find a finite starting point")
    inv_metric = np.eye(d)
    chol_metric = np.eye(d)
    eps = _initial_step_size(model, q, lp, g, inv_metric, chol_metric, rng)
    adapt = _DualAveraging(eps, config.target_acceptance)
    window_ends = _metric_windows(config.n_warmup) if config.adapt_metric else []
    window_start = _buffers(config.n_warmup)[0]
    window: list[np.ndarray] = []

    n_draws = config.n_draws
    draws = np.empty((n_draws, d))
    divergent = np.zeros(n_draws, dtype=bool)
    accept_stats = np.empty(n_draws)
    warm_div = 0
    lo, hi = 1.0 - config.jitter, 1.0 + config.jitter
    for it in range(config.n_iterations):
        n_steps = max(1, int(round(config.n_leapfrog * rng.uniform(lo, hi))))
        p0 = _momentum(rng, chol_metric)
        h0 = -lp + _kinetic(p0, inv_metric)
        q1, p1, g1, lp1, div = trajectory(q, p0, g, lp, eps, inv_metric, n_steps, config.max_energy_error, model)
        dh = -lp1 + _kinetic(p1, inv_metric) - h0
        div = div or not np.isfinite(dh) or dh > config.max_energy_error
        accept_stat = 0.0 if div else math.exp(min(0.0, -dh))
        if rng.uniform() < accept_stat:
            q, g, lp = q1, g1, lp1

        if it < config.n_warmup:
            warm_div += div
            eps = float(adapt.update(accept_stat))
            if window_ends and it >= window_start:
                window.append(q.copy())
                if it + 1 in window_ends:
                    w = np.array(window)
                    cov = np.atleast_2d(np.cov(w, rowvar=False)) if len(w) > 1 else np.eye(d)
                    inv_metric = _regularized_metric(cov, len(w), dense)
                    chol_metric = np.linalg.cholesky(np.linalg.inv(inv_metric))
                    window = []
                    eps = _initial_step_size(model, q, lp, g, inv_metric, chol_metric, rng)
                    adapt.restart(eps)
            if it + 1 == config.n_warmup:
                eps = float(adapt.final())
        else:
            k = it - config.n_warmup
            draws[k] = q
            divergent[k] = div
            accept_stats[k] = accept_stat
    return draws, divergent, accept_stats, eps, inv_metric, warm_div


def derive_seed(base: int, *keys: int) -> int:
    """Deterministic child seed for a sub-fit identified by integer ``keys``."""
    ss = np.random.SeedSequence([int(base) & 0xFFFFFFFF, *(int(k) & 0xFFFFFFFF for k in keys)])
    return int(ss.generate_state(1)[0])


def run_hmc(post: LogPosterior, config: SamplerConfig) -> HMCResult:
    """Run ``config.n_chains`` independent chains, each from its own spawned seed."""
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    runs = [_run_chain(post, config, np.random.default_rng(s)) for s in seeds]
    return HMCResult(
        q=np.stack([r[0] for r in runs]),
        divergent=np.stack([r[1] for r in runs]),
        accept_stat=np.stack([r[2] for r in runs]),
        step_size=np.array([r[3] for r in runs]),
        inv_metric=np.stack([r[4] for r in runs]),
        warmup_divergences=np.array([r[5] for r in runs]),
    )
