"""Posterior draws container, model fitting entry points and prior construction."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..dataset import MONTH_ABBR, MonthlySeries
from ..design import DesignMatrix, ModelKind, ModelSpec, build_design
from ..errors import ConvergenceWarning, DivergenceWarning, MissingYearError, SamplerWarning
from .density import LogPosterior, ParameterDraw, Prior
from .diagnostics import ess, rhat
from .hmc import SamplerConfig, run_hmc

DRAWS_SCHEMA = "excessmort.posterior_draws/1"
MAX_DIVERGENCE_RATE = 0.01
MAX_RHAT = 1.01
EXACT_FIT_SIGMA = 1e-9


@dataclass(eq=False)
class PosteriorDraws:
    """Post-warm-up draws in raw units, shape ``(chains, draws, params)``."""

    values: np.ndarray
    param_names: tuple[str, ...]
    spec: ModelSpec
    config: SamplerConfig
    prior: Prior
    fit_years: tuple[int, ...]
    excluded: tuple[tuple[int, int], ...] = ()
    divergences: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    step_size: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dataset_fingerprint: str = ""

    @property
    def n_chains(self) -> int:
        return self.values.shape[0]

    @property
    def n_draws(self) -> int:
        return self.values.shape[1]

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(self.spec.columns())

    def param(self, name: str) -> np.ndarray:
        return self.values[:, :, self.param_names.index(name)]

    def flat(self, name: str | None = None) -> np.ndarray:
        """Chains concatenated; all parameters when ``name`` is None."""
        if name is None:
            return self.values.reshape(-1, self.values.shape[-1])
        return self.param(name).reshape(-1)

    def coef_matrix(self) -> np.ndarray:
        return self.flat()[:, : len(self.columns)]

    def draw(self, chain: int, i: int) -> ParameterDraw:
        row = self.values[chain, i]
        p = len(self.columns)
        rho = float(row[self.param_names.index("rho")]) if "rho" in self.param_names else 0.0
        return ParameterDraw(row[:p], float(row[p]), rho)

    @property
    def chains(self) -> list[list[ParameterDraw]]:
        return [[self.draw(c, i) for i in range(self.n_draws)] for c in range(self.n_chains)]

    def divergence_rate(self) -> float:
        return float(np.sum(self.divergences)) / max(1, self.n_chains * self.n_draws)

    def rhat(self, name: str) -> float:
        return rhat(self, name)

    def ess(self, name: str) -> float:
        return ess(self, name)

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for name in self.param_names:
            x = self.flat(name)
            out[name] = {
                "mean": float(x.mean()),
                "sd": float(x.std(ddof=1)),
                "rhat": self.rhat(name),
                "ess": self.ess(name),
            }
        return out

    # --- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        chains = []
        for c in range(self.n_chains):
            chains.append({
                "chain": c,
                "step_size": float(self.step_size[c]) if len(self.step_size) else None,
                "divergences": int(self.divergences[c]) if len(self.divergences) else 0,
                "draws": {n: self.values[c, :, k].tolist() for k, n in enumerate(self.param_names)},
            })
        return {
            "schema": DRAWS_SCHEMA,
            "config": self.config.to_dict(),
            "model": self.spec.to_dict(),
            "prior": self.prior.to_dict(),
            "fit_years": list(self.fit_years),
            "excluded": [list(e) for e in self.excluded],
            "dataset_fingerprint": self.dataset_fingerprint,
            "param_names": list(self.param_names),
            "chains": chains,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorDraws":
        if d.get("schema") != DRAWS_SCHEMA:
            raise ValueError(f"unsupported draws schema {d.get('schema')!r}")
        names = tuple(d["param_names"])
        values = np.array(
            [[ch["draws"][n] for n in names] for ch in d["chains"]], dtype=float
        ).transpose(0, 2, 1)
        return cls(
            values=values,
            param_names=names,
            spec=ModelSpec.from_dict(d["model"]),
            config=SamplerConfig.from_dict(d["config"]),
            prior=Prior.from_dict(d["prior"]),
            fit_years=tuple(d["fit_years"]),
            excluded=tuple(tuple(e) for e in d["excluded"]),
            divergences=np.array([ch["divergences"] for ch in d["chains"]], dtype=np.int64),
            step_size=np.array([ch["step_size"] or 0.0 for ch in d["chains"]]),
            dataset_fingerprint=d.get("dataset_fingerprint", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PosteriorDraws":
        return cls.from_dict(json.loads(text))


def sample_hmc(
    design: DesignMatrix,
    prior: Prior,
    spec: ModelSpec,
    config: SamplerConfig,
    *,
    fit_years: Iterable[int] = (),
    excluded: Iterable[tuple[int, int]] = (),
    dataset_fingerprint: str = "",
    check: bool = True,
) -> PosteriorDraws:
    """Sample the posterior of ``spec`` on ``design``.

    Warns with :class:`DivergenceWarning` when more than 1% of retained
    transitions diverged and with :class:`ConvergenceWarning` when any
    split R-hat exceeds 1.01.
    """
    post = LogPosterior(design, prior, spec.ar1)
    point = _exact_fit(design)
    if point is not None:
        # sigma -> 0 makes the posterior improper; report its point-mass limit
        warnings.warn("outcome is reproduced exactly by the design; returning point-mass draws", SamplerWarning, stacklevel=2)
        row = np.concatenate([point, [EXACT_FIT_SIGMA * max(1.0, float(np.abs(design.y).max()))], [0.0] * spec.ar1])
        C, D, K = config.n_chains, config.n_draws, len(row)
        values = np.broadcast_to(row, (C, D, K)).copy()
        divergent = np.zeros(C, dtype=int)
        step_size = np.zeros(C)
    else:
        res = run_hmc(post, config)
        C, D, K = res.q.shape
        values = post.constrain(res.q.reshape(-1, K)).reshape(C, D, K)
        divergent = res.divergent.sum(axis=1)
        step_size = res.step_size
    draws = PosteriorDraws(
        values=values,
        param_names=tuple(post.param_names),
        spec=spec,
        config=config,
        prior=prior,
        fit_years=tuple(sorted(set(int(y) for y in fit_years))),
        excluded=tuple((int(y), int(m)) for y, m in excluded),
        divergences=divergent,
        step_size=step_size,
        dataset_fingerprint=dataset_fingerprint,
    )
    if check:
        check_draws(draws)
    return draws


def _exact_fit(design: DesignMatrix) -> np.ndarray | None:
    """Least-squares coefficients when they reproduce ``y`` to rounding error, else None."""
    coef, *_ = np.linalg.lstsq(design.X, design.y, rcond=None)
    resid = design.y - design.X @ coef
    tol = 1e-9 * max(1.0, float(np.abs(design.y).max()))
    return coef if float(np.abs(resid).max()) <= tol else None


def check_draws(draws: PosteriorDraws) -> list[str]:
    """Emit sampler warnings; returns the warning messages."""
    msgs = []
    rate = draws.divergence_rate()
    if rate > MAX_DIVERGENCE_RATE:
        msgs.append(f"{rate:.1%} of post-warm-up transitions diverged")
        warnings.warn(msgs[-1], DivergenceWarning, stacklevel=3)
    if draws.n_draws >= 4:
        bad = {n: r for n in draws.param_names if (r := draws.rhat(n)) > MAX_RHAT}
        if bad:
            worst = max(bad, key=bad.get)
            msgs.append(f"R-hat above {MAX_RHAT} for {sorted(bad)} (worst {worst}={bad[worst]:.3f})")
            warnings.warn(msgs[-1], ConvergenceWarning, stacklevel=3)
    return msgs


def fit_model(
    series: MonthlySeries,
    spec: ModelSpec,
    years: Iterable[int] | None = None,
    prior: Prior | None = None,
    config: SamplerConfig | None = None,
    exclude: Iterable[tuple[int, int]] = (),
    check: bool = True,
) -> PosteriorDraws:
    """Build the design for ``years`` (minus ``exclude``) and sample it."""
    years = series.year_set if years is None else sorted(set(int(y) for y in years))
    missing = [y for y in years if y not in series.year_set]
    if missing:
        raise MissingYearError(f"fit years not in series: {missing}")
    exclude = tuple(exclude)
    design = build_design(series, spec, years=years, exclude=exclude)
    return sample_hmc(
        design,
        prior or Prior.diffuse(),
        spec,
        config or SamplerConfig(),
        fit_years=years,
        excluded=exclude,
        dataset_fingerprint=series.fingerprint(),
        check=check,
    )


def derive_informative_prior(
    series: MonthlySeries, reference_years: Iterable[int], spec: ModelSpec | None = None
) -> Prior:
    """Normal priors on the intercept and month offsets from reference-year data.

    Means are the reference-period month averages (intercept: the baseline
    month; offsets: each month minus the baseline month). Every SD is the
    pooled within-month residual SD of the reference period.
    """
    spec = spec or ModelSpec(ModelKind.MONTH_DUMMIES_AR1)
    if spec.kind not in (ModelKind.MONTH_DUMMIES, ModelKind.MONTH_DUMMIES_AR1):
        raise ValueError("informative month priors apply to the month-dummy models only")
    ys = sorted(set(int(y) for y in reference_years))
    if len(ys) < 2:
        raise MissingYearError("need at least two reference years for a pooled SD")
    grid = np.empty((len(ys), 12))
    for i, y in enumerate(ys):
        for m in range(1, 13):
            if (y, m) not in series:
                raise MissingYearError(f"reference point {y}-{m:02d} missing")
            grid[i, m - 1] = series.get(y, m)
    means = grid.mean(axis=0)
    resid = grid - means
    pooled_sd = float(np.sqrt(np.sum(resid**2) / (grid.size - 12)))
    if pooled_sd <= 0:
        raise ValueError("reference years have zero within-month variation")
    b = spec.baseline_month - 1
    informative = {"intercept": (float(means[b]), pooled_sd)}
    for m in range(12):
        if m != b:
            informative[MONTH_ABBR[m]] = (float(means[m] - means[b]), pooled_sd)
    return Prior(informative=informative, reference_years=tuple(ys))
