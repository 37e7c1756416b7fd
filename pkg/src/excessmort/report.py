"""Consolidated report: excess estimates, placebo results, model comparison and published figures."""

from __future__ import annotations

from typing import Sequence

from .modelcomp import FitSummary, comparison_table
from .placebo import PlaceboReport
from .predict import ExcessEstimate

REPORT_SCHEMA = "excessmort.report/1"

# Published vital-statistics-based estimates of the same death toll, as printed.
LITERATURE = (
    {"study": "santoslozada2018estimates; santos2018use", "estimate": "1,110", "ui95": "---"},
    {"study": "robles2017official", "estimate": "1,052", "ui95": "---"},
    {"study": "rivera2018estimating", "estimate": "822", "ui95": "605-1039"},
    {"study": "santos2018differential", "estimate": "1,271", "ui95": "1,872-2,315"},
    {"study": "kishore2018mortality", "estimate": "4,645", "ui95": "793-8,498"},
)


def _window_label(est: ExcessEstimate) -> str:
    (y0, m0), (y1, m1) = est.window[0], est.window[-1]
    return f"{y0}-{m0:02d}" if (y0, m0) == (y1, m1) else f"{y0}-{m0:02d}:{y1}-{m1:02d}"


def build_report(
    estimates: Sequence[ExcessEstimate],
    placebos: Sequence[PlaceboReport] = (),
    summaries: Sequence[FitSummary] = (),
    input_manifests: Sequence[dict] = (),
) -> dict:
    """Merge artifacts into one JSON-ready dictionary, ordered deterministically."""
    if not estimates:
        raise ValueError("a report needs at least one excess estimate")
    ests = sorted(estimates, key=lambda e: (e.window, e.model, e.interval))
    return {
        "schema": REPORT_SCHEMA,
        "excess": [dict(e.to_dict(), label=_window_label(e)) for e in ests],
        "placebo": [p.to_dict() for p in placebos] if placebos else "not run",
        "model_comparison": [s.to_dict() for s in summaries] if summaries else "not run",
        "literature": [dict(r) for r in LITERATURE],
        "inputs": list(input_manifests),
    }


def render_text(report: dict) -> str:
    """Plain-text version of :func:`build_report` output."""
    out = ["EXCESS DEATHS", f"{'window':<18}{'central / 50% UI / 95% UI':<36}model"]
    for e in report["excess"]:
        est = ExcessEstimate.from_dict(e)
        out.append(f"{e['label']:<18}{est.row():<36}{est.model} ({est.interval})")
    out.append("")
    out.append("PLACEBO TESTS")
    if report["placebo"] == "not run":
        out.append("not run")
    else:
        for p in report["placebo"]:
            out.append(PlaceboReport.from_dict(p).table())
            out.append("")
    out.append("")
    out.append("MODEL COMPARISON")
    if report["model_comparison"] == "not run":
        out.append("not run")
    else:
        out.append(comparison_table([FitSummary.from_dict(s) for s in report["model_comparison"]]))
    out.append("")
    out.append("PUBLISHED ESTIMATES")
    out.append(f"{'study':<44}{'estimate':>10}  95% UI")
    for r in report["literature"]:
        out.append(f"{r['study']:<44}{r['estimate']:>10}  {r['ui95']}")
    return "\n".join(out) + "\n"
