"""Posterior-predictive counterfactual tallies and excess-event estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .dataset import MonthlySeries, from_month_index, month_index
from .design import ModelKind, regressors
from .errors import ContextError, LeakageError, WindowError
from .inference.fitting import PosteriorDraws

Conditioning = Literal["observed", "simulated"]
EXCESS_SCHEMA = "excessmort.excess_estimate/1"


@dataclass(frozen=True, eq=False)
class PredictiveDistribution:
    """Simulated tallies per target month, one column per target.

    ``draws`` holds the simulated tallies and ``expected`` the per-draw
    conditional means they were simulated around; both are ``(S, T)``.
    """

    targets: tuple[tuple[int, int], ...]
    draws: np.ndarray
    expected: np.ndarray
    model: str
    fit_years: tuple[int, ...]
    seed: int
    conditioning: str

    def column(self, year: int, month: int) -> np.ndarray:
        try:
            return self.draws[:, self.targets.index((year, month))]
        except ValueError:
            raise WindowError(f"{year}-{month:02d} was not predicted") from None

    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    def interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        a = (1.0 - level) / 2.0
        lo, hi = np.quantile(self.draws, [a, 1.0 - a], axis=0)
        return lo, hi


def round_to(x: float, unit: int) -> int:
    """Nearest multiple of ``unit``, halves rounded up."""
    return int(unit * math.floor(x / unit + 0.5))


@dataclass(frozen=True)
class ExcessEstimate:
    """Central value (mean) and equal-tailed intervals of summed excess over a window."""

    window: tuple[tuple[int, int], ...]
    central: float
    ui50: tuple[float, float]
    ui95: tuple[float, float]
    rounding_unit: int = 10
    model: str = ""
    fit_years: tuple[int, ...] = ()
    seed: int = 0
    interval: str = "draws"
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def display(self) -> dict:
        u = self.rounding_unit
        return {
            "central": round_to(self.central, u),
            "ui50": [round_to(v, u) for v in self.ui50],
            "ui95": [round_to(v, u) for v in self.ui95],
        }

    def row(self) -> str:
        d = self.display
        return f"{d['central']} / {d['ui50'][0]};{d['ui50'][1]} / {d['ui95'][0]};{d['ui95'][1]}"

    def to_dict(self) -> dict:
        return {
            "schema": EXCESS_SCHEMA,
            "window": [list(w) for w in self.window],
            "central": self.central,
            "ui50": list(self.ui50),
            "ui95": list(self.ui95),
            "rounding_unit": self.rounding_unit,
            "display": self.display,
            "model": self.model,
            "fit_years": list(self.fit_years),
            "seed": self.seed,
            "interval": self.interval,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExcessEstimate":
        return cls(
            window=tuple(tuple(w) for w in d["window"]),
            central=d["central"],
            ui50=tuple(d["ui50"]),
            ui95=tuple(d["ui95"]),
            rounding_unit=d["rounding_unit"],
            model=d["model"],
            fit_years=tuple(d["fit_years"]),
            seed=d["seed"],
            interval=d.get("interval", "draws"),
            extra=d.get("extra", {}),
        )


def month_range(start: tuple[int, int], end: tuple[int, int]) -> list[tuple[int, int]]:
    """Inclusive list of calendar months from ``start`` to ``end``."""
    a, b = month_index(*start), month_index(*end)
    if b < a:
        raise WindowError(f"window end {end} precedes start {start}")
    return [from_month_index(k) for k in range(a, b + 1)]


def posterior_predict(
    draws: PosteriorDraws,
    targets: Iterable[tuple[int, int]],
    observed_context: MonthlySeries,
    seed: int | None = None,
    conditioning: Conditioning = "observed",
) -> PredictiveDistribution:
    """Simulate one tally per posterior draw for each target month.

    With ``conditioning="observed"`` the AR(1) error (Model 3) and the
    lagged outcome (Model 4) use the previous month's observed value from
    ``observed_context`` whenever it is there, i.e. one-step-ahead
    prediction. With ``"simulated"`` consecutive targets are chained on
    their own simulated values, and a Model 3 run of targets opens from
    the stationary error distribution. Noise is Normal(0, sigma) apart from
    that stationary opening, which uses sigma / sqrt(1 - rho^2).
    """
    if conditioning not in ("observed", "simulated"):
        raise ValueError(f"unknown conditioning {conditioning!r}")
    targets = tuple(sorted(set((int(y), int(m)) for y, m in targets), key=lambda t: month_index(*t)))
    if not targets:
        raise WindowError("no target months")
    for y, m in targets:
        if not 1 <= m <= 12:
            raise WindowError(f"invalid target month {y}-{m}")
    spec = draws.spec
    p = len(spec.columns())
    flat = draws.flat()
    coef = flat[:, :p]
    sigma = flat[:, p]
    rho = flat[:, p + 1] if spec.ar1 else np.zeros(len(flat))
    S = len(flat)
    if seed is None:
        seed = int(draws.config.seed) + 1
    rng = np.random.default_rng(seed)

    def observed(ym):
        return observed_context.get(*ym) if ym in observed_context else None

    sims: dict[tuple[int, int], np.ndarray] = {}
    errors: dict[tuple[int, int], np.ndarray] = {}
    out = np.empty((S, len(targets)))
    expected = np.empty((S, len(targets)))
    for k, ym in enumerate(targets):
        prev = from_month_index(month_index(*ym) - 1)
        prev_obs = observed(prev)
        use_obs = conditioning == "observed" and prev_obs is not None
        z = rng.standard_normal(S)
        if spec.kind is ModelKind.DYNAMIC_SEASONAL:
            if use_obs:
                lag = np.full(S, float(prev_obs))
            elif prev in sims:
                lag = sims[prev]
            elif prev_obs is not None:
                lag = np.full(S, float(prev_obs))
            else:
                raise ContextError(f"no count for {prev[0]}-{prev[1]:02d} to serve as lag for {ym}")
            x = regressors(spec, ym[1], lag=0.0)
            mu = coef @ x + coef[:, 1] * lag
            exp_k, noise = mu, sigma * z
        else:
            mu = coef @ regressors(spec, ym[1])
            if spec.ar1:
                if use_obs:
                    prev_mu = coef @ regressors(spec, prev[1])
                    shift = rho * (prev_obs - prev_mu)
                    noise = sigma * z
                elif prev in errors:
                    shift = rho * errors[prev]
                    noise = sigma * z
                else:
                    shift = 0.0
                    noise = sigma / np.sqrt(1.0 - rho**2) * z
                exp_k = mu + shift
                errors[ym] = exp_k - mu + noise
            else:
                exp_k, noise = mu, sigma * z
        expected[:, k] = exp_k
        out[:, k] = exp_k + noise
        sims[ym] = out[:, k]
    return PredictiveDistribution(
        targets=targets,
        draws=out,
        expected=expected,
        model=spec.label,
        fit_years=draws.fit_years,
        seed=int(seed),
        conditioning=conditioning,
    )


def check_no_leakage(fit_years: Iterable[int], window: Iterable[tuple[int, int]]) -> None:
    """Raise :class:`LeakageError` if any window month falls in a fitting year."""
    fit = set(int(y) for y in fit_years)
    bad = sorted({(int(y), int(m)) for y, m in window if int(y) in fit})
    if bad:
        shown = ", ".join(f"{y}-{m:02d}" for y, m in bad)
        raise LeakageError(f"window overlaps fitting years: {shown}")


def years_before(series: MonthlySeries, window: Iterable[tuple[int, int]]) -> list[int]:
    """Years of ``series`` strictly before the earliest window year."""
    first = min(int(y) for y, _ in window)
    return [y for y in series.year_set if y < first]


def _window_matrix(pred: PredictiveDistribution, observed: MonthlySeries, window: Sequence[tuple[int, int]]):
    window = [(int(y), int(m)) for y, m in window]
    if not window:
        raise WindowError("empty window")
    check_no_leakage(pred.fit_years, window)
    missing_pred = [w for w in window if w not in pred.targets]
    missing_obs = [w for w in window if w not in observed]
    if missing_pred or missing_obs:
        raise WindowError(f"window months missing: predictions {missing_pred}, observations {missing_obs}")
    cols = [pred.targets.index(w) for w in window]
    obs = np.array([observed.get(*w) for w in window], dtype=float)
    return window, obs - pred.draws[:, cols]


def excess_draws(pred: PredictiveDistribution, observed: MonthlySeries, window) -> np.ndarray:
    """Per-draw summed ``observed - predicted`` over the window."""
    _, diff = _window_matrix(pred, observed, window)
    return diff.sum(axis=1)


def excess(
    pred: PredictiveDistribution,
    observed: MonthlySeries,
    window: Sequence[tuple[int, int]],
    rounding_unit: int = 10,
    interval: Literal["draws", "monthwise"] = "draws",
) -> ExcessEstimate:
    """Summed excess over ``window``: mean plus equal-tailed 50% and 95% intervals.

    ``interval="draws"`` takes quantiles of the per-draw window sum.
    ``interval="monthwise"`` adds up each month's own interval bounds, the
    convention behind published month-by-month tables whose multi-month
    bounds equal the sums of the single-month bounds; it is never narrower.
    """
    window, diff = _window_matrix(pred, observed, window)
    total = diff.sum(axis=1)
    probs = [0.025, 0.25, 0.75, 0.975]
    if interval == "draws":
        q = np.quantile(total, probs)
    elif interval == "monthwise":
        q = np.quantile(diff, probs, axis=0).sum(axis=1)
    else:
        raise ValueError(f"unknown interval method {interval!r}")
    return ExcessEstimate(
        window=tuple(window),
        central=float(total.mean()),
        ui50=(float(q[1]), float(q[2])),
        ui95=(float(q[0]), float(q[3])),
        rounding_unit=rounding_unit,
        model=pred.model,
        fit_years=pred.fit_years,
        seed=pred.seed,
        interval=interval,
    )


def prediction_errors(pred: PredictiveDistribution, observed: MonthlySeries, months) -> list[float]:
    """Observed minus predictive mean for each month, unrounded."""
    months, diff = _window_matrix(pred, observed, months)
    return [float(v) for v in diff.mean(axis=0)]
