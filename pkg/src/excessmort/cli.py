"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data error, 4 sampler warning
escalated by ``--strict``.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import warnings
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .artifacts import RunManifest, canonical_json, file_digest, read_artifact, write_artifact
from .dataset import (
    BUILTIN,
    MONTH_ABBR,
    MonthlySeries,
    load_csv,
    monthly_baseline,
    standardize,
    to_csv_text,
)
from .design import ModelSpec, build_design
from .errors import ExcessMortError, SamplerWarning, WindowError
from .inference import PosteriorDraws, Prior, SamplerConfig, derive_informative_prior, fit_model
from .modelcomp import FitSummary, comparison_table, loo_ic, summarize_fit
from .parallel import default_threads
from .placebo import (
    PlaceboReport,
    baseline_sensitivity,
    exclude_and_reestimate,
    exclusion_report,
    leave_one_year_out,
    one_year_ahead,
    within_ui_placebo,
)
from .predict import ExcessEstimate, check_no_leakage, excess, month_range, posterior_predict, years_before
from .report import build_report, render_text

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STRICT = 0, 2, 3, 4
SEED_ENV = "EXCESSMORT_SEED"
DEFAULT_SEED = 20170920
FIGURE_NAMES = ("1a", "1b", "2", "3a", "3b", "4a", "4b", "5")


class UsageError(Exception):
    pass


# --- argument parsing helpers -------------------------------------------


def parse_years(text: str) -> list[int]:
    """``2010:2016`` (inclusive), ``2014`` or ``2010,2012``."""
    text = text.strip()
    m = re.fullmatch(r"(\d{4}):(\d{4})", text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if b < a:
            raise argparse.ArgumentTypeError(f"year range {text!r} runs backwards")
        return list(range(a, b + 1))
    if re.fullmatch(r"\d{4}(,\d{4})*", text):
        return sorted(set(int(y) for y in text.split(",")))
    raise argparse.ArgumentTypeError(f"expected YYYY:YYYY, got {text!r}")


def parse_month(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d{4})-(\d{1,2})", text.strip())
    if not m or not 1 <= int(m.group(2)) <= 12:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def parse_window(text: str) -> list[tuple[int, int]]:
    """``YYYY-MM:YYYY-MM`` inclusive, or a single ``YYYY-MM``."""
    parts = text.split(":")
    if len(parts) == 1:
        return [parse_month(parts[0])]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM:YYYY-MM, got {text!r}")
    try:
        return month_range(parse_month(parts[0]), parse_month(parts[1]))
    except WindowError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def parse_month_set(text: str) -> list[int]:
    """Calendar months: ``09:10`` (inclusive range) or ``1,2,12``."""
    text = text.strip()
    m = re.fullmatch(r"(\d{1,2}):(\d{1,2})", text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        months = list(range(a, b + 1))
    elif re.fullmatch(r"\d{1,2}(,\d{1,2})*", text):
        months = sorted(set(int(v) for v in text.split(",")))
    else:
        raise argparse.ArgumentTypeError(f"expected MM:MM, got {text!r}")
    if not months or not all(1 <= v <= 12 for v in months):
        raise argparse.ArgumentTypeError(f"invalid months in {text!r}")
    return months


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def load_data(source: str) -> MonthlySeries:
    """A CSV path, or ``builtin`` / ``builtin:SEED`` for the reconstructed series."""
    if source == "builtin" or source.startswith("builtin:"):
        _, _, seed = source.partition(":")
        try:
            return BUILTIN["pr-synthetic"](int(seed) if seed else 1)
        except ValueError:
            raise UsageError(f"bad builtin seed in {source!r}") from None
    return load_csv(source)


# --- shared plumbing ------------------------------------------------------


def _config(args) -> SamplerConfig:
    try:
        return SamplerConfig(
            n_chains=args.chains, n_iterations=args.iterations, n_warmup=args.warmup, seed=args.seed
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def _manifest(args, series: MonthlySeries | None = None, spec: ModelSpec | None = None, config=None, inputs=()):
    return RunManifest(
        command=tuple(args.argv),
        dataset_fingerprint=series.fingerprint() if series is not None else "",
        model=spec.to_dict() if spec is not None else None,
        sampler=config.to_dict() if config is not None else None,
        inputs=tuple(inputs),
    )


def _out(args, name: str) -> Path:
    return Path(args.out_dir) / name


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_draws(path: str) -> PosteriorDraws:
    try:
        return PosteriorDraws.from_dict(read_artifact(path))
    except (KeyError, TypeError, ValueError) as e:
        raise ExcessMortError(f"{path}: not a posterior-draws file ({e})") from None


def _fit_years(args, series: MonthlySeries, default: list[int]) -> list[int]:
    return args.years if getattr(args, "years", None) else default


def _pre_event_years(series: MonthlySeries) -> list[int]:
    """Every year before the last one, or all years for a single-year series."""
    return series.year_set[:-1] or series.year_set


def _prior(args, series: MonthlySeries, spec: ModelSpec, years: list[int]) -> tuple[Prior, list[int]]:
    """Prior from flags; an informative prior removes its reference years from the fit."""
    ref = getattr(args, "informative_prior", None)
    if ref:
        prior = derive_informative_prior(series, ref, spec)
        years = [y for y in years if y not in set(ref)]
        return prior, years
    scale = getattr(args, "prior_scale", None)
    return (Prior(scale=scale) if scale else Prior.diffuse()), years


# --- commands ---------------------------------------------------------------


def cmd_data(args) -> int:
    if args.action == "reconstruct":
        series = BUILTIN["pr-synthetic"](args.synth_seed)
        text = to_csv_text(series)
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    series = load_data(args.data)
    years = args.years or _pre_event_years(series)
    base = monthly_baseline(series, years)
    if args.action == "summary":
        rows = [f"{'month':<6}{'mean':>10}{'sd':>10}{'n':>4}"]
        for m in range(12):
            rows.append(f"{MONTH_ABBR[m]:<6}{base.mu[m]:>10.1f}{base.sigma[m]:>10.1f}{base.n_years[m]:>4}")
        _emit("\n".join(rows))
        payload = {
            "schema": "excessmort.baseline/1",
            "years": list(base.years),
            "mu": list(base.mu),
            "sigma": list(base.sigma),
            "n_years": list(base.n_years),
        }
        write_artifact(_out(args, "baseline.json"), payload, _manifest(args, series))
        return EXIT_OK
    z = standardize(series, base)
    lines = ["year,month,z"] + [f"{y},{m},{v:.6f}" for y, m, v in z.entries]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_fit(args) -> int:
    series = load_data(args.data)
    spec = ModelSpec(args.model)
    config = _config(args)
    prior, years = _prior(args, series, spec, _fit_years(args, series, _pre_event_years(series)))
    draws = fit_model(series, spec, years, prior, config, exclude=args.exclude or ())
    design = build_design(series, spec, years=years, exclude=args.exclude or ())
    loo = loo_ic(series, spec, prior, config, years=years, threads=args.threads) if args.loo else None
    summary = summarize_fit(draws, design, loo)
    manifest = _manifest(args, series, spec, config)
    write_artifact(_out(args, f"draws-model{spec.kind.value}.json"), draws.to_dict(), manifest)
    write_artifact(_out(args, f"summary-model{spec.kind.value}.json"), summary.to_dict(), manifest)
    _emit(comparison_table([summary]))
    return EXIT_OK


def _excess_table(est: ExcessEstimate) -> str:
    d = est.display
    return "\n".join(
        [
            f"window            {est.window[0][0]}-{est.window[0][1]:02d}:{est.window[-1][0]}-{est.window[-1][1]:02d}",
            f"central estimate  {d['central']}",
            f"50% UI            {d['ui50'][0]}; {d['ui50'][1]}",
            f"95% UI            {d['ui95'][0]}; {d['ui95'][1]}",
            f"row               {est.row()}",
        ]
    )


def cmd_excess(args) -> int:
    series = load_data(args.data)
    window = args.window
    inputs = []
    if args.draws:
        draws = _load_draws(args.draws)
        inputs.append(("draws", file_digest(args.draws)))
        if draws.dataset_fingerprint and draws.dataset_fingerprint != series.fingerprint():
            raise ExcessMortError("draws were fitted to a different dataset than --data")
        check_no_leakage(draws.fit_years, window)
        spec, config, years = draws.spec, draws.config, list(draws.fit_years)
        refit = bool(args.exclude or args.informative_prior)
    else:
        spec, config = ModelSpec(args.model), _config(args)
        years = _fit_years(args, series, years_before(series, window))
        refit = True
    check_no_leakage(years, window)
    if refit:
        prior, years = _prior(args, series, spec, years)
        draws = fit_model(series, spec, years, prior, config, exclude=args.exclude or ())
    pred = posterior_predict(draws, window, series, conditioning=args.conditioning)
    est = excess(pred, series, window, interval=args.interval)
    if args.exclude:
        est.extra["excluded"] = [list(e) for e in args.exclude]
    if args.informative_prior:
        est.extra["informative_prior_years"] = list(args.informative_prior)
    (y0, m0), (y1, m1) = window[0], window[-1]
    name = f"excess-{y0}-{m0:02d}_{y1}-{m1:02d}.json"
    write_artifact(_out(args, name), est.to_dict(), _manifest(args, series, spec, draws.config, inputs))
    _emit(_excess_table(est))
    return EXIT_OK


def cmd_placebo(args) -> int:
    series = load_data(args.data)
    spec = ModelSpec(args.model)
    config = _config(args)
    target = args.target or series.year_set[-1]
    if args.scheme == "within-ui":
        year = args.year or target
        years = _fit_years(args, series, [y for y in series.year_set if y < year])
        draws = fit_model(series, spec, years, None, config)
        pred = posterior_predict(draws, month_range((year, 1), (year, 12)), series, conditioning=args.conditioning)
        report = within_ui_placebo(pred, series, [(year, m) for m in range(1, 9)])
    elif args.scheme == "loyo":
        report = leave_one_year_out(
            series, spec, args.window, target, comparison_years=args.years, config=config,
            conditioning=args.conditioning, threads=args.threads,
        )
    elif args.scheme == "one-ahead":
        report = one_year_ahead(
            series, spec, args.window, target, comparison_years=args.years, config=config,
            conditioning=args.conditioning, threads=args.threads,
        )
    else:
        if not args.exclude:
            raise UsageError("--scheme exclude needs at least one --exclude YYYY-MM")
        window = [(target, m) for m in args.window]
        est = exclude_and_reestimate(
            series, spec, args.exclude, window, fit_years=args.years, config=config,
            conditioning=args.conditioning, interval=args.interval,
        )
        report = exclusion_report(est, config)
    write_artifact(_out(args, f"placebo-{args.scheme}.json"), report.to_dict(), _manifest(args, series, spec, config))
    _emit(report.table())
    return EXIT_OK


def cmd_compare(args) -> int:
    series = load_data(args.data)
    config = _config(args)
    years = _fit_years(args, series, _pre_event_years(series))
    loo_config = config.replace(
        n_iterations=args.loo_iterations or config.n_iterations,
        n_warmup=args.loo_warmup if args.loo_warmup is not None else config.n_warmup,
    )
    summaries = []
    for k in args.models:
        spec = ModelSpec(k)
        draws = fit_model(series, spec, years, None, config)
        design = build_design(series, spec, years=years)
        loo = loo_ic(series, spec, None, loo_config, years=years, threads=args.threads) if args.loo else None
        summaries.append(summarize_fit(draws, design, loo))
    payload = {"schema": "excessmort.comparison/1", "summaries": [s.to_dict() for s in summaries]}
    write_artifact(_out(args, "compare.json"), payload, _manifest(args, series, None, config))
    _emit(comparison_table(summaries))
    return EXIT_OK


def _need(value, flag: str, figure: str):
    if value is None:
        raise UsageError(f"figure {figure} needs {flag}")
    return value


def cmd_plot(args) -> int:
    from . import plots

    series = load_data(args.data)
    target = args.target or series.year_set[-1]
    baseline = args.years or [y for y in series.year_set if y < target]
    figures = list(FIGURE_NAMES) if "all" in args.figure else list(dict.fromkeys(args.figure))
    draws = _load_draws(args.draws) if args.draws else None
    placebo = PlaceboReport.from_dict(read_artifact(args.placebo)) if args.placebo else None
    inputs = [(k, file_digest(p)) for k, p in (("draws", args.draws), ("placebo", args.placebo)) if p]
    manifest = _manifest(args, series, draws.spec if draws else None, draws.config if draws else None, inputs)
    makers: dict[str, Callable[[], plots.FigureData]] = {
        "1a": lambda: plots.raw_series(series, baseline),
        "1b": lambda: plots.by_calendar_month(series, target, baseline),
        "2": lambda: plots.standardized(series, baseline, ((target, 9), (target, 12))),
        "3a": lambda: plots.observed_vs_fitted(
            _need(draws, "--draws", "3a"), build_design(series, draws.spec, years=draws.fit_years, exclude=draws.excluded)
        ),
        "3b": lambda: plots.parameter_posteriors(_need(draws, "--draws", "3b")),
        "4a": lambda: plots.prediction_errors_plot(_need(placebo, "--placebo", "4a")),
        "4b": lambda: plots.predictive_band(
            posterior_predict(_need(draws, "--draws", "4b"), month_range((target, 1), (target, 12)), series),
            series,
        ),
        "5": lambda: plots.excess_densities(
            baseline_sensitivity(
                series,
                _need(draws, "--draws", "5").spec,
                month_range((target, 9), (target, 12)),
                args.drop_years or [y for y in draws.fit_years][:-1],
                fit_years=draws.fit_years,
                config=draws.config,
            )
        ),
    }
    for f in figures:
        data = makers[f]()
        path = plots.write_svg(data, _out(args, f"figure-{f}.svg"), manifest.digest)
        _emit(str(path))
    write_artifact(_out(args, "figures.json"), {"figures": figures}, manifest)
    return EXIT_OK


def cmd_report(args) -> int:
    def load(paths, parse):
        items, manifests, inputs = [], [], []
        for p in paths or ():
            d = read_artifact(p)
            items.extend(parse(d))
            manifests.append(d.get("manifest", {}))
            inputs.append((Path(p).name, file_digest(p)))
        return items, manifests, inputs

    ests, m1, i1 = load(args.excess, lambda d: [ExcessEstimate.from_dict(d)])
    plc, m2, i2 = load(args.placebo, lambda d: [PlaceboReport.from_dict(d)])
    cmp_, m3, i3 = load(
        args.compare,
        lambda d: [FitSummary.from_dict(s) for s in d["summaries"]] if "summaries" in d else [FitSummary.from_dict(d)],
    )
    try:
        report = build_report(ests, plc, cmp_, m1 + m2 + m3)
    except ValueError as e:
        raise UsageError(str(e)) from None
    manifest = _manifest(args, inputs=i1 + i2 + i3)
    write_artifact(_out(args, "report.json"), report, manifest)
    text = render_text(report)
    _out(args, "report.txt").write_text(text)
    _emit(text)
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--data", default="builtin", help="CSV path, or builtin[:SEED] for the reconstructed series")
    g.add_argument("--out-dir", default=".", help="directory for JSON/SVG outputs (default: current)")
    g.add_argument("--seed", type=int, default=None, help=f"sampler seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
    g.add_argument("--chains", type=int, default=4)
    g.add_argument("--iterations", type=int, default=2000, help="iterations per chain, warm-up included")
    g.add_argument("--warmup", type=int, default=1000)
    g.add_argument("--threads", type=int, default=None, help="worker processes for refits (default: all cores)")
    g.add_argument("--strict", action="store_true", help="exit 4 on any sampler warning")
    g.add_argument("--conditioning", choices=("observed", "simulated"), default="observed")

    parser = argparse.ArgumentParser(prog="excessmort", description="Bayesian excess-death estimation from monthly tallies.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("data", parents=[common], help="reconstruct, summarize or standardize a series")
    p.add_argument("action", choices=("reconstruct", "summary", "standardize"))
    p.add_argument("--years", type=parse_years, help="baseline years, YYYY:YYYY")
    p.add_argument("--synth-seed", type=int, default=1, help="seed for the moment-matched synthesis")
    p.add_argument("--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_data)

    p = sub.add_parser("fit", parents=[common], help="fit one model and write its draws and summary")
    p.add_argument("--model", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--years", type=parse_years, help="fitting years, YYYY:YYYY (default: all but the last year)")
    p.add_argument("--exclude", type=parse_month, action="append", help="drop a point, YYYY-MM (repeatable)")
    p.add_argument("--informative-prior", type=parse_years, help="reference years for a data-based prior")
    p.add_argument("--prior-scale", type=float, help="scale of the t priors on the standardized scale")
    p.add_argument("--loo", action="store_true", help="also compute the exact leave-one-out criterion")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("excess", parents=[common], help="estimate excess deaths over a window")
    p.add_argument("--window", type=parse_window, required=True, help="YYYY-MM:YYYY-MM, inclusive")
    p.add_argument("--draws", help="draws JSON from `fit`; otherwise a fit is run here")
    p.add_argument("--model", type=int, choices=(1, 2, 3, 4), default=3)
    p.add_argument("--years", type=parse_years, help="fitting years when fitting here (default: before window)")
    p.add_argument("--exclude", type=parse_month, action="append", help="refit without this point, YYYY-MM")
    p.add_argument("--informative-prior", type=parse_years, help="reference years for a data-based prior")
    p.add_argument("--prior-scale", type=float)
    p.add_argument("--interval", choices=("draws", "monthwise"), default="draws")
    p.set_defaults(func=cmd_excess)

    p = sub.add_parser("placebo", parents=[common], help="run a placebo scheme")
    p.add_argument("--scheme", choices=("within-ui", "loyo", "one-ahead", "exclude"), required=True)
    p.add_argument("--window", type=parse_month_set, default=[9, 10], help="calendar months, MM:MM")
    p.add_argument("--target", type=int, help="target year (default: last year in the data)")
    p.add_argument("--year", type=int, help="year checked by within-ui (default: target)")
    p.add_argument("--years", type=parse_years, help="comparison or fitting years")
    p.add_argument("--model", type=int, choices=(1, 2, 3, 4), default=3)
    p.add_argument("--exclude", type=parse_month, action="append", help="point to drop (exclude scheme)")
    p.add_argument("--interval", choices=("draws", "monthwise"), default="draws")
    p.set_defaults(func=cmd_placebo)

    p = sub.add_parser("compare", parents=[common], help="fit several models and compare RMSE / LOO-IC")
    p.add_argument("--models", type=lambda s: [int(v) for v in s.split(",")], default=[1, 2, 3, 4])
    p.add_argument("--years", type=parse_years, help="fitting years, YYYY:YYYY (default: all but the last year)")
    p.add_argument("--loo", action="store_true")
    p.add_argument("--loo-iterations", type=int, help="iterations per leave-one-out refit")
    p.add_argument("--loo-warmup", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", parents=[common], help="write SVG figures")
    p.add_argument("--figure", action="append", required=True, choices=("all",) + FIGURE_NAMES)
    p.add_argument("--draws", help="draws JSON (figures 3a, 3b, 4b, 5)")
    p.add_argument("--placebo", help="leave-one-year-out report with per-month errors (figure 4a)")
    p.add_argument("--target", type=int)
    p.add_argument("--years", type=parse_years, help="baseline years (default: before target)")
    p.add_argument("--drop-years", type=parse_years, help="baselines to drop one at a time (figure 5)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("report", parents=[common], help="merge artifacts into one report")
    p.add_argument("--excess", nargs="+", required=True)
    p.add_argument("--placebo", nargs="*")
    p.add_argument("--compare", nargs="*")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.threads is None:
            args.threads = default_threads()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SamplerWarning)
            code = args.func(args)
        sampler = [w for w in caught if issubclass(w.category, SamplerWarning)]
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        if sampler and args.strict:
            return EXIT_STRICT
        return code
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ExcessMortError, OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
