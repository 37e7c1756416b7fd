"""Placebo checks: pre-event coverage, held-out-year prediction errors, outlier sensitivity."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import MONTH_ABBR, MonthlySeries
from .design import ModelSpec
from .errors import InsufficientDataError, MissingPointError, WindowError
from .inference import Prior, SamplerConfig, derive_seed, fit_model
from .parallel import pmap
from .predict import (
    ExcessEstimate,
    PredictiveDistribution,
    excess,
    excess_draws,
    posterior_predict,
    prediction_errors,
    years_before,
)

PLACEBO_SCHEMA = "excessmort.placebo_report/1"
SCHEMES = ("within-ui", "leave-one-year-out", "one-year-ahead", "outlier-exclusion")


@dataclass(frozen=True)
class MonthCheck:
    """Coverage of one observed month by its predictive interval."""

    year: int
    month: int
    observed: float
    lower: float
    upper: float
    inside: bool
    exceedance: float

    def to_dict(self) -> dict:
        return {
            "year": self.year,
            "month": self.month,
            "observed": self.observed,
            "lower": self.lower,
            "upper": self.upper,
            "inside": self.inside,
            "exceedance": self.exceedance,
        }


@dataclass(frozen=True)
class PlaceboReport:
    """Outcome of one placebo scheme.

    Window errors are ``observed - predictive mean`` summed over the window
    months. ``comparison_mean_abs`` averages their absolute values over the
    comparison years; ``ratio`` is ``|target_error| / comparison_mean_abs``
    and is ``None`` when the comparison errors are all zero (below a
    millionth of the observed tallies).
    """

    scheme: str
    model: str = ""
    window_months: tuple[int, ...] = ()
    target_year: int | None = None
    months: tuple[MonthCheck, ...] = ()
    year_errors: tuple[tuple[int, float], ...] = ()
    month_errors: tuple[tuple[int, tuple[float, ...]], ...] = ()
    target_error: float | None = None
    comparison_mean_abs: float | None = None
    comparison_mean_signed: float | None = None
    ratio: float | None = None
    seeds: tuple[tuple[str, int], ...] = ()
    config: dict = field(default_factory=dict)
    estimate: ExcessEstimate | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown placebo scheme {self.scheme!r}")

    @property
    def per_month(self) -> dict[str, float | None]:
        """Target and comparison errors divided by the window length."""
        k = len(self.window_months) or 1
        return {
            "target": None if self.target_error is None else abs(self.target_error) / k,
            "comparison": None if self.comparison_mean_abs is None else self.comparison_mean_abs / k,
        }

    def to_dict(self) -> dict:
        return {
            "schema": PLACEBO_SCHEMA,
            "scheme": self.scheme,
            "model": self.model,
            "window_months": list(self.window_months),
            "target_year": self.target_year,
            "months": [m.to_dict() for m in self.months],
            "year_errors": [[y, e] for y, e in self.year_errors],
            "month_errors": [[y, list(e)] for y, e in self.month_errors],
            "target_error": self.target_error,
            "comparison_mean_abs": self.comparison_mean_abs,
            "comparison_mean_signed": self.comparison_mean_signed,
            "ratio": self.ratio,
            "per_month": self.per_month,
            "seeds": [[k, v] for k, v in self.seeds],
            "config": self.config,
            "estimate": None if self.estimate is None else self.estimate.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlaceboReport":
        return cls(
            scheme=d["scheme"],
            model=d["model"],
            window_months=tuple(d["window_months"]),
            target_year=d["target_year"],
            months=tuple(MonthCheck(**m) for m in d["months"]),
            year_errors=tuple((int(y), float(e)) for y, e in d["year_errors"]),
            month_errors=tuple((int(y), tuple(float(v) for v in e)) for y, e in d.get("month_errors", [])),
            target_error=d["target_error"],
            comparison_mean_abs=d["comparison_mean_abs"],
            comparison_mean_signed=d["comparison_mean_signed"],
            ratio=d["ratio"],
            seeds=tuple((str(k), int(v)) for k, v in d["seeds"]),
            config=d["config"],
            estimate=None if d["estimate"] is None else ExcessEstimate.from_dict(d["estimate"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def table(self) -> str:
        """Plain-text rendering for terminals and reports."""
        lines = [f"placebo: {self.scheme} ({self.model})"]
        if self.months:
            lines.append(f"{'month':<9}{'observed':>10}{'95% lower':>11}{'95% upper':>11}  result")
            for m in self.months:
                flag = "inside" if m.inside else f"outside by {m.exceedance:+.0f}"
                lines.append(
                    f"{m.year}-{m.month:02d}  {m.observed:>10.0f}{m.lower:>11.0f}{m.upper:>11.0f}  {flag}"
                )
        if self.year_errors:
            months = ",".join(MONTH_ABBR[m - 1] for m in self.window_months)
            lines.append(f"window months: {months}")
            lines.append(f"{'year':<6}{'summed error':>14}")
            for y, e in self.year_errors:
                lines.append(f"{y:<6}{e:>14.1f}")
        if self.target_error is not None:
            pm = self.per_month
            lines.append(f"target {self.target_year} error: {self.target_error:.1f} ({pm['target']:.1f} per month)")
            lines.append(
                f"comparison mean |error|: {self.comparison_mean_abs:.1f} ({pm['comparison']:.1f} per month), "
                f"signed mean {self.comparison_mean_signed:.1f}"
            )
            lines.append("ratio: " + ("n/a" if self.ratio is None else f"{self.ratio:.2f}"))
        if self.estimate is not None:
            lines.append(f"excess (central / 50% / 95%): {self.estimate.row()}")
        return "\n".join(lines)


def _check_month(year: int, month: int, observed: float, lo: float, hi: float) -> MonthCheck:
    if observed > hi:
        exc = observed - hi
    elif observed < lo:
        exc = observed - lo
    else:
        exc = 0.0
    return MonthCheck(int(year), int(month), float(observed), float(lo), float(hi), bool(exc == 0.0), float(exc))


def within_ui_placebo(
    pred: PredictiveDistribution,
    observed: MonthlySeries,
    months: Sequence[tuple[int, int]] | None = None,
    level: float = 0.95,
) -> PlaceboReport:
    """Flag each month whose observed count falls outside its predictive interval.

    ``months`` defaults to January through August of the first predicted
    year. Outside months carry the signed distance to the nearer bound.
    """
    if months is None:
        year = pred.targets[0][0]
        months = [(year, m) for m in range(1, 9)]
    months = [(int(y), int(m)) for y, m in months]
    missing = [ym for ym in months if ym not in pred.targets]
    if missing:
        raise WindowError(f"no predictions for {missing}")
    prediction_errors(pred, observed, months)  # validates observations and leakage
    lo, hi = pred.interval(level)
    checks = []
    for y, m in months:
        k = pred.targets.index((y, m))
        checks.append(_check_month(y, m, observed.get(y, m), lo[k], hi[k]))
    return PlaceboReport(
        scheme="within-ui",
        model=pred.model,
        window_months=tuple(m for _, m in months),
        target_year=months[0][0],
        months=tuple(checks),
        seeds=(("predict", pred.seed),),
    )


@dataclass(frozen=True)
class _Task:
    series: MonthlySeries
    spec: ModelSpec
    fit_years: tuple[int, ...]
    window: tuple[tuple[int, int], ...]
    prior: Prior | None
    config: SamplerConfig
    conditioning: str
    exclude: tuple[tuple[int, int], ...] = ()


def _window_errors(task: _Task) -> list[float]:
    draws = fit_model(task.series, task.spec, task.fit_years, task.prior, task.config, task.exclude, check=False)
    pred = posterior_predict(draws, task.window, task.series, conditioning=task.conditioning)
    return prediction_errors(pred, task.series, task.window)


def _normalize_months(window_months: Iterable[int]) -> tuple[int, ...]:
    months = tuple(sorted(set(int(m) for m in window_months)))
    if not months or not all(1 <= m <= 12 for m in months):
        raise WindowError(f"invalid window months {months}")
    return months


def _summarize(
    scheme: str,
    spec: ModelSpec,
    months: tuple[int, ...],
    target_year: int,
    tasks: dict[int, _Task],
    threads: int | None,
    config: SamplerConfig,
) -> PlaceboReport:
    years = sorted(tasks)
    monthly = dict(zip(years, pmap(_window_errors, [tasks[y] for y in years], threads)))
    errors = {y: float(sum(e)) for y, e in monthly.items()}
    target = errors.pop(target_year)
    comp = np.array([errors[y] for y in sorted(errors)])
    mean_abs = float(np.abs(comp).mean())
    # errors below a millionth of the tallies are numerical noise, e.g. from exact fits
    scale = max(1.0, max(abs(t.series.get(*ym)) for t in tasks.values() for ym in t.window))
    ratio = None if mean_abs <= 1e-6 * scale else abs(target) / mean_abs
    return PlaceboReport(
        scheme=scheme,
        model=spec.label,
        window_months=months,
        target_year=target_year,
        year_errors=tuple((y, errors[y]) for y in sorted(errors)),
        month_errors=tuple((y, tuple(monthly[y])) for y in years),
        target_error=target,
        comparison_mean_abs=mean_abs,
        comparison_mean_signed=float(comp.mean()),
        ratio=ratio,
        seeds=tuple((str(y), tasks[y].config.seed) for y in years),
        config=config.to_dict(),
    )


def leave_one_year_out(
    series: MonthlySeries,
    spec: ModelSpec,
    window_months: Iterable[int],
    target_year: int,
    *,
    comparison_years: Iterable[int] | None = None,
    prior: Prior | None = None,
    config: SamplerConfig | None = None,
    conditioning: str = "observed",
    threads: int | None = 1,
) -> PlaceboReport:
    """Held-out-year prediction errors versus the target year's error.

    Each comparison year is predicted from a fit on the other comparison
    years; the target year is predicted from a fit on all of them.
    Comparison years default to every year before ``target_year``.
    """
    config = config or SamplerConfig()
    months = _normalize_months(window_months)
    comp = sorted(set(int(y) for y in comparison_years)) if comparison_years is not None else [
        y for y in series.year_set if y < target_year
    ]
    if target_year in comp:
        raise WindowError("target year cannot also be a comparison year")
    if len(comp) < 4:
        raise InsufficientDataError(
            f"leave-one-year-out needs at least 3 fitting years besides the held-out one, got {len(comp)} years"
        )
    if target_year not in series.year_set:
        raise InsufficientDataError(f"target year {target_year} not in series")
    tasks = {}
    for y in comp + [target_year]:
        fit_years = tuple(c for c in comp if c != y)
        tasks[y] = _Task(
            series,
            spec,
            fit_years,
            tuple((y, m) for m in months),
            prior,
            config.replace(seed=derive_seed(config.seed, 1, y)),
            conditioning,
        )
    return _summarize("leave-one-year-out", spec, months, target_year, tasks, threads, config)


def one_year_ahead(
    series: MonthlySeries,
    spec: ModelSpec,
    window_months: Iterable[int],
    target_year: int,
    *,
    comparison_years: Iterable[int] | None = None,
    min_history: int = 2,
    prior: Prior | None = None,
    config: SamplerConfig | None = None,
    conditioning: str = "observed",
    threads: int | None = 1,
) -> PlaceboReport:
    """Forecast errors when each year is predicted only from the years before it.

    Comparison years default to every year before ``target_year`` with at
    least ``min_history`` earlier years in the series.
    """
    config = config or SamplerConfig()
    months = _normalize_months(window_months)
    years = [y for y in series.year_set if y <= target_year]
    if target_year not in series.year_set:
        raise InsufficientDataError(f"target year {target_year} not in series")
    if len(years) < 4:
        raise InsufficientDataError(f"one-year-ahead needs at least 4 years of data, got {len(years)}")
    start = years[0]
    if comparison_years is None:
        comp = [y for y in years if y < target_year and y - start >= min_history]
    else:
        comp = sorted(set(int(y) for y in comparison_years))
    if any(y >= target_year for y in comp):
        raise WindowError("comparison years must precede the target year")
    for y in comp + [target_year]:
        history = [h for h in years if h < y]
        if len(history) < min_history:
            raise InsufficientDataError(f"{y} has {len(history)} earlier years; need {min_history}")
    if not comp:
        raise InsufficientDataError("no comparison year has enough history")
    tasks = {}
    for y in comp + [target_year]:
        tasks[y] = _Task(
            series,
            spec,
            tuple(h for h in years if h < y),
            tuple((y, m) for m in months),
            prior,
            config.replace(seed=derive_seed(config.seed, 2, y)),
            conditioning,
        )
    return _summarize("one-year-ahead", spec, months, target_year, tasks, threads, config)


def exclude_and_reestimate(
    series: MonthlySeries,
    spec: ModelSpec,
    excluded: Iterable[tuple[int, int]],
    window: Sequence[tuple[int, int]],
    *,
    fit_years: Iterable[int] | None = None,
    prior: Prior | None = None,
    config: SamplerConfig | None = None,
    conditioning: str = "observed",
    interval: str = "draws",
) -> ExcessEstimate:
    """Refit without the ``excluded`` points and re-estimate excess over ``window``.

    The AR(1) error chain restarts from its stationary distribution after
    each removed point. Fit years default to those before the window. The
    excluded points are listed under ``extra["excluded"]``.
    """
    config = config or SamplerConfig()
    window = [(int(y), int(m)) for y, m in window]
    excluded = tuple((int(y), int(m)) for y, m in excluded)
    years = years_before(series, window) if fit_years is None else sorted(set(int(y) for y in fit_years))
    for y, m in excluded:
        if (y, m) not in series or y not in years:
            raise MissingPointError(f"excluded point {y}-{m:02d} is not in the fitting sample")
    draws = fit_model(series, spec, years, prior, config, exclude=excluded, check=False)
    pred = posterior_predict(draws, window, series, conditioning=conditioning)
    est = excess(pred, series, window, interval=interval)
    est.extra["excluded"] = [list(e) for e in excluded]
    return est


def exclusion_report(est: ExcessEstimate, config: SamplerConfig) -> PlaceboReport:
    """Wrap an outlier-exclusion estimate as a placebo report."""
    return PlaceboReport(
        scheme="outlier-exclusion",
        model=est.model,
        window_months=tuple(m for _, m in est.window),
        target_year=est.window[0][0],
        seeds=(("fit", config.seed), ("predict", est.seed)),
        config=config.to_dict(),
        estimate=est,
    )


def baseline_sensitivity(
    series: MonthlySeries,
    spec: ModelSpec,
    window: Sequence[tuple[int, int]],
    drop_years: Iterable[int],
    *,
    fit_years: Iterable[int] | None = None,
    prior: Prior | None = None,
    config: SamplerConfig | None = None,
    conditioning: str = "observed",
) -> dict[str, np.ndarray]:
    """Excess draws over ``window`` for the full baseline and with each year dropped.

    Keys are ``"all"`` and the dropped year as a string.
    """
    config = config or SamplerConfig()
    years = years_before(series, window) if fit_years is None else sorted(set(int(y) for y in fit_years))
    out = {}
    variants = [("all", years)] + [(str(d), [y for y in years if y != d]) for d in drop_years]
    for key, ys in variants:
        draws = fit_model(series, spec, ys, prior, config, check=False)
        pred = posterior_predict(draws, window, series, conditioning=conditioning)
        out[key] = excess_draws(pred, series, window)
    return out
