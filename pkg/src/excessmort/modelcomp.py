"""In-sample RMSE and exact leave-one-out information criterion for fitted models."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np
from scipy.special import logsumexp

from .dataset import MonthlySeries, from_month_index, month_index
from .design import DesignMatrix, ModelSpec, build_design, regressors
from .inference import PosteriorDraws, Prior, SamplerConfig, check_draws, derive_seed, fit_model
from .parallel import pmap

SUMMARY_SCHEMA = "excessmort.fit_summary/1"
LOG_2PI = math.log(2.0 * math.pi)

Fitted = Literal["conditional", "regression"]


def fitted_values(draws: PosteriorDraws, design: DesignMatrix, fitted: Fitted = "conditional") -> np.ndarray:
    """Posterior-mean fitted values for each design row.

    With ``fitted="conditional"`` an AR(1) model's fitted value adds
    ``rho * (y[t-1] - mean[t-1])`` wherever the previous month is in the
    sample, i.e. the one-step-ahead conditional mean. ``"regression"``
    keeps the regression mean alone.
    """
    coef = draws.coef_matrix()  # (S, p)
    mu = coef @ design.X.T  # (S, n)
    if draws.spec.ar1 and fitted == "conditional":
        rho = draws.flat("rho")[:, None]
        starts = design.segment_starts
        prev_resid = np.zeros_like(mu)
        prev_resid[:, 1:] = design.y[:-1] - mu[:, :-1]
        prev_resid[:, starts] = 0.0
        mu = mu + rho * prev_resid
    elif fitted not in ("conditional", "regression"):
        raise ValueError(f"unknown fitted-value mode {fitted!r}")
    return mu.mean(axis=0)


def rmse(draws: PosteriorDraws, design: DesignMatrix, fitted: Fitted = "conditional") -> float:
    """Root mean squared difference between observations and posterior-mean fitted values."""
    f = fitted_values(draws, design, fitted)
    return float(np.sqrt(np.mean((design.y - f) ** 2)))


@dataclass(frozen=True)
class LooResult:
    value: float
    se: float
    pointwise: tuple[float, ...]
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"value": self.value, "se": self.se, "pointwise": list(self.pointwise), "warnings": list(self.warnings)}

    @classmethod
    def from_dict(cls, d: dict) -> "LooResult":
        return cls(d["value"], d["se"], tuple(d["pointwise"]), tuple(d["warnings"]))


def heldout_logdensity(
    draws: PosteriorDraws,
    series: MonthlySeries,
    point: tuple[int, int],
    in_fit: set[tuple[int, int]],
) -> float:
    """Log posterior-predictive density of the held-out ``point``.

    Models without AR(1) errors use ``N(mean, sigma)``. Under AR(1) errors
    the density conditions on whichever neighbouring months are in
    ``in_fit``: with both neighbours the conditional mean shift is
    ``rho * (e[t-1] + e[t+1]) / (1 + rho^2)`` with variance
    ``sigma^2 / (1 + rho^2)``; with one neighbour it is ``rho * e`` with
    variance ``sigma^2``; with none it is the stationary marginal.
    """
    spec = draws.spec
    y, m = point
    obs = float(series.get(y, m))
    coef = draws.coef_matrix()
    sigma = draws.flat("sigma")
    k = month_index(y, m)
    prev, nxt = from_month_index(k - 1), from_month_index(k + 1)
    if spec.ar1:
        rho = draws.flat("rho")
        mu = coef @ regressors(spec, m)

        def resid(ym):
            return float(series.get(*ym)) - coef @ regressors(spec, ym[1])

        has_prev, has_next = prev in in_fit, nxt in in_fit
        if has_prev and has_next:
            loc = mu + rho * (resid(prev) + resid(nxt)) / (1.0 + rho**2)
            scale = sigma / np.sqrt(1.0 + rho**2)
        elif has_prev or has_next:
            loc = mu + rho * resid(prev if has_prev else nxt)
            scale = sigma
        else:
            loc = mu
            scale = sigma / np.sqrt(1.0 - rho**2)
    else:
        lag = float(series.get(*prev)) if prev in series else None
        loc = coef @ regressors(spec, m, lag)
        scale = sigma
    z = (obs - loc) / scale
    logp = -0.5 * LOG_2PI - np.log(scale) - 0.5 * z * z
    return float(logsumexp(logp) - math.log(len(logp)))


@dataclass(frozen=True)
class _LooTask:
    series: MonthlySeries
    spec: ModelSpec
    years: tuple[int, ...]
    point: tuple[int, int]
    prior: Prior | None
    config: SamplerConfig
    in_fit: frozenset


def _loo_point(task: _LooTask) -> tuple[float, tuple[str, ...]]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        draws = fit_model(task.series, task.spec, task.years, task.prior, task.config, exclude=[task.point], check=False)
        msgs = check_draws(draws)
    lpd = heldout_logdensity(draws, task.series, task.point, set(task.in_fit) - {task.point})
    return lpd, tuple(f"{task.point[0]}-{task.point[1]:02d}: {m}" for m in msgs)


def loo_ic(
    series: MonthlySeries,
    spec: ModelSpec,
    prior: Prior | None = None,
    config: SamplerConfig | None = None,
    years: Iterable[int] | None = None,
    threads: int | None = 1,
) -> LooResult:
    """Exact leave-one-out information criterion by refitting once per observation.

    Returns ``-2 * sum(lpd)`` and its standard error
    ``sqrt(N * var(-2 * lpd))``. Convergence problems in any refit are
    collected in ``warnings`` rather than raised.
    """
    config = config or SamplerConfig()
    years = tuple(series.year_set if years is None else sorted(set(int(y) for y in years)))
    design = build_design(series, spec, years=years)
    in_fit = frozenset(design.time_index)
    tasks = [
        _LooTask(series, spec, years, pt, prior, config.replace(seed=derive_seed(config.seed, 3, *pt)), in_fit)
        for pt in design.time_index
    ]
    results = pmap(_loo_point, tasks, threads)
    lpd = np.array([r[0] for r in results])
    dev = -2.0 * lpd
    msgs = tuple(m for r in results for m in r[1])
    if msgs:
        warnings.warn(f"{len(msgs)} leave-one-out refits had sampler warnings", UserWarning, stacklevel=2)
    return LooResult(
        value=float(dev.sum()),
        se=float(math.sqrt(len(dev) * dev.var(ddof=1))) if len(dev) > 1 else 0.0,
        pointwise=tuple(float(v) for v in lpd),
        warnings=msgs,
    )


@dataclass(frozen=True)
class FitSummary:
    """Posterior summary of one fitted model with its goodness-of-fit measures."""

    model: str
    n: int
    params: dict[str, dict[str, float]]
    rmse: float
    loo: LooResult | None = None
    fitted: str = "conditional"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rmse >= 0:
            raise ValueError("rmse must be non-negative")

    def to_dict(self) -> dict:
        return {
            "schema": SUMMARY_SCHEMA,
            "model": self.model,
            "n": self.n,
            "params": self.params,
            "rmse": self.rmse,
            "loo": None if self.loo is None else self.loo.to_dict(),
            "fitted": self.fitted,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitSummary":
        return cls(
            model=d["model"],
            n=d["n"],
            params=d["params"],
            rmse=d["rmse"],
            loo=None if d["loo"] is None else LooResult.from_dict(d["loo"]),
            fitted=d.get("fitted", "conditional"),
            extra=d.get("extra", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def summarize_fit(
    draws: PosteriorDraws,
    design: DesignMatrix,
    loo: LooResult | None = None,
    fitted: Fitted = "conditional",
) -> FitSummary:
    params = {k: {"mean": v["mean"], "sd": v["sd"]} for k, v in draws.summary().items()}
    return FitSummary(
        model=draws.spec.label,
        n=len(design),
        params=params,
        rmse=rmse(draws, design, fitted),
        loo=loo,
        fitted=fitted,
    )


def comparison_table(summaries: list[FitSummary]) -> str:
    """Side-by-side posterior means (SDs in parentheses) with RMSE and LOO-IC rows."""
    names: list[str] = []
    for s in summaries:
        for k in s.params:
            if k not in names:
                names.append(k)
    width = 16
    head = f"{'':<10}" + "".join(f"{s.model:>{width}}" for s in summaries)
    lines = [head]
    for k in names:
        cells = []
        for s in summaries:
            p = s.params.get(k)
            if p is None:
                cells.append("")
            else:
                digits = 2 if k == "rho" or abs(p["mean"]) < 10 else 0
                cells.append(f"{p['mean']:.{digits}f} ({p['sd']:.{digits}f})")
        lines.append(f"{k:<10}" + "".join(f"{c:>{width}}" for c in cells))
    lines.append(f"{'N':<10}" + "".join(f"{s.n:>{width}}" for s in summaries))
    lines.append(f"{'RMSE':<10}" + "".join(f"{s.rmse:>{width}.0f}" for s in summaries))
    if any(s.loo is not None for s in summaries):
        cells = ["" if s.loo is None else f"{s.loo.value:.0f} ({s.loo.se:.0f})" for s in summaries]
        lines.append(f"{'LOO-IC':<10}" + "".join(f"{c:>{width}}" for c in cells))
    return "\n".join(lines)
