"""Vector-graphics figures with their plotted data embedded as an SVG comment."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.stats import gaussian_kde  # noqa: E402

from .dataset import MONTH_ABBR, MonthlySeries, monthly_baseline, month_index, standardize  # noqa: E402
from .design import DesignMatrix  # noqa: E402
from .inference import PosteriorDraws  # noqa: E402
from .modelcomp import fitted_values  # noqa: E402
from .placebo import PlaceboReport  # noqa: E402
from .predict import PredictiveDistribution  # noqa: E402

_STYLE = {
    "svg.hashsalt": "excessmort",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


@dataclass
class FigureData:
    """A rendered figure plus the table of values it plots."""

    name: str
    figure: plt.Figure
    header: tuple[str, ...]
    rows: list[tuple]

    def table_text(self) -> str:
        lines = [",".join(self.header)]
        for r in self.rows:
            lines.append(",".join(_fmt(v) for v in r))
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _new(figsize=(6.4, 3.6)):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=figsize)
    return fig, ax


def _x(series_index: Sequence[tuple[int, int]]) -> np.ndarray:
    return np.array([month_index(y, m) for y, m in series_index], dtype=float) / 12.0


def raw_series(series: MonthlySeries, baseline_years: Sequence[int]) -> FigureData:
    """Monthly counts with the baseline-period mean (dashed) and mean + 2 SD (dotted)."""
    base = np.array([c for y, _, c in series.entries if y in set(baseline_years)], dtype=float)
    mean, sd = float(base.mean()), float(base.std(ddof=1))
    fig, ax = _new()
    x = _x(series.time_index)
    ax.plot(x, series.counts, color="black", lw=1)
    ax.axhline(mean, ls="--", color="grey", lw=1)
    ax.axhline(mean + 2 * sd, ls=":", color="grey", lw=1)
    ax.set_ylabel("deaths per month")
    ax.set_xlabel("year")
    rows = [(y, m, int(c)) for y, m, c in series.entries]
    rows.append(("mean", "", mean))
    rows.append(("mean_plus_2sd", "", mean + 2 * sd))
    return FigureData("1a", fig, ("year", "month", "deaths"), rows)


def by_calendar_month(series: MonthlySeries, highlight_year: int, baseline_years: Sequence[int]) -> FigureData:
    """Counts by calendar month: diamonds for baseline years, solid dots for ``highlight_year``."""
    fig, ax = _new()
    rows = []
    for y in baseline_years:
        ms = [m for m in range(1, 13) if (y, m) in series]
        vals = [series.get(y, m) for m in ms]
        ax.scatter(ms, vals, marker="D", facecolors="none", edgecolors="grey", s=14)
        rows += [(y, m, v) for m, v in zip(ms, vals)]
    ms = [m for m in range(1, 13) if (highlight_year, m) in series]
    vals = [series.get(highlight_year, m) for m in ms]
    ax.scatter(ms, vals, color="black", s=18)
    rows += [(highlight_year, m, v) for m, v in zip(ms, vals)]
    ax.set_xticks(range(1, 13), [a.capitalize() for a in MONTH_ABBR])
    ax.set_ylabel("deaths per month")
    return FigureData("1b", fig, ("year", "month", "deaths"), rows)


def standardized(
    series: MonthlySeries, baseline_years: Sequence[int], shade: tuple[tuple[int, int], tuple[int, int]]
) -> FigureData:
    """Month-specific z-scores with the ``shade`` months (inclusive) in a grey band."""
    z = standardize(series, monthly_baseline(series, baseline_years))
    fig, ax = _new()
    x = _x(series.time_index)
    ax.bar(x, z.z, width=1 / 14, color="black")
    lo = month_index(*shade[0]) / 12.0 - 0.5 / 12
    hi = month_index(*shade[1]) / 12.0 + 0.5 / 12
    ax.axvspan(lo, hi, color="grey", alpha=0.3, lw=0)
    ax.axhline(0, color="grey", lw=0.5)
    ax.set_ylabel("standardized deaths")
    rows = [(y, m, float(v)) for y, m, v in z.entries]
    s0, s1 = shade
    rows.append(("shade", f"{s0[0]}-{s0[1]:02d}", f"{s1[0]}-{s1[1]:02d}"))
    return FigureData("2", fig, ("year", "month", "z"), rows)


def observed_vs_fitted(draws: PosteriorDraws, design: DesignMatrix) -> FigureData:
    """Observed against posterior-mean fitted values, with the 45-degree line."""
    f = fitted_values(draws, design)
    fig, ax = _new((4.0, 4.0))
    ax.scatter(f, design.y, color="black", s=10)
    lo = float(min(f.min(), design.y.min()))
    hi = float(max(f.max(), design.y.max()))
    ax.plot([lo, hi], [lo, hi], color="grey", lw=1)
    ax.set_xlabel("fitted")
    ax.set_ylabel("observed")
    rows = [(y, m, float(o), float(v)) for (y, m), o, v in zip(design.time_index, design.y, f)]
    rows.append(("identity", "", lo, hi))
    return FigureData("3a", fig, ("year", "month", "observed", "fitted"), rows)


def parameter_posteriors(draws: PosteriorDraws) -> FigureData:
    """Posterior densities of the non-intercept coefficients as violins."""
    names = [c for c in draws.columns if c != "intercept"]
    fig, ax = _new()
    data = [draws.flat(n) for n in names]
    ax.violinplot(data, showmeans=True, showextrema=False)
    ax.axhline(0, color="grey", lw=0.5)
    ax.set_xticks(range(1, len(names) + 1), names)
    ax.set_ylabel("deaths relative to baseline")
    rows = []
    for n, d in zip(names, data):
        q = np.quantile(d, [0.025, 0.5, 0.975])
        rows.append((n, float(d.mean()), float(q[0]), float(q[1]), float(q[2])))
    return FigureData("3b", fig, ("parameter", "mean", "q025", "median", "q975"), rows)


def prediction_errors_plot(report: PlaceboReport) -> FigureData:
    """Observed minus predicted by calendar month: diamonds for held-out years, dots for the target."""
    if not report.month_errors:
        raise ValueError("placebo report has no per-month errors")
    months = list(report.window_months)
    fig, ax = _new()
    rows = []
    for y, errs in report.month_errors:
        if y == report.target_year:
            ax.scatter(months, errs, color="black", s=18, zorder=3)
        else:
            ax.scatter(months, errs, marker="D", facecolors="none", edgecolors="grey", s=14)
        rows += [(y, m, float(e)) for m, e in zip(months, errs)]
    ax.axhline(0, color="grey", lw=0.5)
    ax.set_xticks(months, [MONTH_ABBR[m - 1].capitalize() for m in months])
    ax.set_ylabel("observed minus predicted")
    return FigureData("4a", fig, ("year", "month", "error"), rows)


def predictive_band(pred: PredictiveDistribution, observed: MonthlySeries) -> FigureData:
    """95% predictive interval per target month with observed counts as dots."""
    lo, hi = pred.interval(0.95)
    mean = pred.mean()
    x = np.arange(len(pred.targets))
    fig, ax = _new()
    ax.fill_between(x, lo, hi, color="grey", alpha=0.35, lw=0)
    ax.plot(x, mean, color="grey", lw=1)
    rows = []
    for k, (y, m) in enumerate(pred.targets):
        obs = float(observed.get(y, m)) if (y, m) in observed else float("nan")
        rows.append((y, m, float(lo[k]), float(mean[k]), float(hi[k]), obs))
    obs_x = [k for k, r in enumerate(rows) if not np.isnan(r[-1])]
    ax.scatter(obs_x, [rows[k][-1] for k in obs_x], color="black", s=18, zorder=3)
    ax.set_xticks(x, [f"{MONTH_ABBR[m - 1].capitalize()}" for _, m in pred.targets])
    ax.set_ylabel("deaths per month")
    return FigureData("4b", fig, ("year", "month", "lower95", "mean", "upper95", "observed"), rows)


def excess_densities(samples: Mapping[str, np.ndarray]) -> FigureData:
    """Kernel density of excess draws per baseline; ``"all"`` solid, the rest dashed."""
    allv = np.concatenate([np.asarray(v, dtype=float) for v in samples.values()])
    grid = np.linspace(allv.min(), allv.max(), 200)
    fig, ax = _new()
    rows = []
    for key in sorted(samples, key=lambda k: (k != "all", k)):
        v = np.asarray(samples[key], dtype=float)
        dens = gaussian_kde(v)(grid) if np.ptp(v) > 0 else np.zeros_like(grid)
        ax.plot(grid, dens, color="black", lw=1.5 if key == "all" else 0.8, ls="-" if key == "all" else "--")
        q = np.quantile(v, [0.025, 0.975])
        rows.append((key, float(v.mean()), float(q[0]), float(q[1])))
    ax.set_xlabel("excess deaths")
    ax.set_ylabel("density")
    return FigureData("5", fig, ("baseline", "mean", "q025", "q975"), rows)


def render_svg(data: FigureData, manifest_digest: str = "") -> str:
    """SVG text with a data comment block; byte-stable for identical inputs."""
    buf = io.StringIO()
    with plt.rc_context(_STYLE):
        data.figure.savefig(buf, format="svg", metadata={"Date": None, "Creator": None}, bbox_inches="tight")
    plt.close(data.figure)
    svg = buf.getvalue()
    comment = f"figure {data.name}\nmanifest {manifest_digest}\n{data.table_text()}".replace("--", "- -")
    head, sep, rest = svg.partition("<svg")
    return f"{head}<!--\n{comment}\n-->\n{sep}{rest}"


def write_svg(data: FigureData, path: str | Path, manifest_digest: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(data, manifest_digest))
    return path
