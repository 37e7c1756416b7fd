"""Log-likelihoods, priors and log-posteriors with analytic gradients.

Sampling happens on an unconstrained, internally standardized scale:
the outcome is centred and scaled by its fitting-sample mean and SD, the
non-intercept predictors by their own mean and SD, sigma enters as
``log(sigma_std)`` and rho as ``atanh(rho)``. Student-t priors act on that
scale; informative normal priors act on raw-unit coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import gammaln

from ..design import DesignMatrix
from ._kernels import logp_grad_row

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Prior:
    """Student-t priors on the standardized scale, optionally with raw-unit normals.

    ``informative`` maps coefficient names (``"intercept"``, ``"feb"``, ...)
    to a ``(mean, sd)`` pair in deaths; those coefficients get a normal
    prior in place of the t. Sigma and rho always keep the t prior.
    """

    df: float = 3.0
    location: float = 0.0
    scale: float = 1.0
    informative: Mapping[str, tuple[float, float]] | None = None
    reference_years: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not (self.df > 0 and self.scale > 0):
            raise ValueError("prior df and scale must be positive")
        for name, (_, sd) in (self.informative or {}).items():
            if not sd > 0:
                raise ValueError(f"informative prior SD for {name!r} must be positive")

    @classmethod
    def diffuse(cls) -> "Prior":
        return cls()

    @classmethod
    def flat(cls, scale: float = 1e6) -> "Prior":
        return cls(scale=scale)

    @property
    def kind(self) -> str:
        return "informative" if self.informative else "diffuse"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "df": self.df,
            "location": self.location,
            "scale": self.scale,
            "informative": {k: list(v) for k, v in (self.informative or {}).items()} or None,
            "reference_years": list(self.reference_years),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Prior":
        inf = d.get("informative")
        return cls(
            df=d["df"],
            location=d["location"],
            scale=d["scale"],
            informative={k: (float(v[0]), float(v[1])) for k, v in inf.items()} if inf else None,
            reference_years=tuple(d.get("reference_years", ())),
        )


@dataclass(frozen=True)
class ParameterDraw:
    """One parameter set in raw units; ``coef`` follows the design's column order."""

    coef: np.ndarray
    sigma: float
    rho: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=float))
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie strictly inside (-1, 1)")

    @property
    def alpha(self) -> float:
        return float(self.coef[0])

    @property
    def theta(self) -> np.ndarray:
        return self.coef[1:]


def student_t_logpdf(x, df: float, loc: float, scale: float):
    z = (np.asarray(x) - loc) / scale
    const = gammaln((df + 1) / 2) - gammaln(df / 2) - 0.5 * math.log(df * math.pi) - math.log(scale)
    return const - (df + 1) / 2 * np.log1p(z * z / df)


def gaussian_ar1_loglik(resid: np.ndarray, sigma: float, rho: float, starts: np.ndarray | None = None) -> float:
    """Exact Gaussian AR(1) log-density of ``resid``.

    Each run of consecutive rows (a new run begins wherever ``starts`` is
    True) opens from the stationary marginal ``N(0, sigma^2 / (1 - rho^2))``;
    later rows are ``N(rho * previous, sigma^2)``. With ``rho == 0`` this is
    the i.i.d. normal log-likelihood.
    """
    e = np.asarray(resid, dtype=float)
    n = len(e)
    if starts is None:
        starts = np.zeros(n, dtype=bool)
        starts[0] = True
    c2 = 1.0 - rho * rho
    u = np.empty(n)
    u[starts] = math.sqrt(c2) * e[starts]
    ns = np.flatnonzero(~starts)
    u[ns] = e[ns] - rho * e[ns - 1]
    n_seg = int(starts.sum())
    return float(-0.5 * n * LOG_2PI - n * math.log(sigma) + 0.5 * n_seg * math.log(c2) - 0.5 * np.dot(u, u) / sigma**2)


def log_likelihood(params: ParameterDraw, design: DesignMatrix, ar1: bool) -> float:
    """Raw-scale log-likelihood of ``design.y`` given ``params``."""
    resid = design.y - design.X @ params.coef
    rho = params.rho if ar1 else 0.0
    return gaussian_ar1_loglik(resid, params.sigma, rho, design.segment_starts)


class LogPosterior:
    """Batched log-posterior and gradient on the unconstrained scale.

    Rows of the input array ``q`` are independent parameter vectors laid
    out as ``[coefficients..., log sigma_std, (atanh rho)]``.
    """

    def __init__(self, design: DesignMatrix, prior: Prior, ar1: bool):
        self.design = design
        self.prior = prior
        self.ar1 = bool(ar1)
        y = np.asarray(design.y, dtype=float)
        X = np.asarray(design.X, dtype=float)
        n, p = X.shape
        self.n, self.p = n, p
        self.dim = p + 1 + int(self.ar1)
        self.y_loc = float(y.mean())
        sd = float(y.std(ddof=1)) if n > 1 else 0.0
        self.y_scale = sd if sd > 0 else 1.0
        x_loc = np.zeros(p)
        x_scale = np.ones(p)
        for j in range(1, p):
            s = X[:, j].std()
            if s > 0:
                x_loc[j] = X[:, j].mean()
                x_scale[j] = s
        self.x_loc, self.x_scale = x_loc, x_scale
        self.Xs = (X - x_loc) / x_scale
        self.ys = (y - self.y_loc) / self.y_scale
        # raw_coef = raw_offset + A @ coef_std
        A = np.diag(self.y_scale / x_scale)
        A[0, 1:] = -self.y_scale * x_loc[1:] / x_scale[1:]
        self.A = A
        self.raw_offset = np.zeros(p)
        self.raw_offset[0] = self.y_loc
        starts = design.segment_starts
        self.starts = np.flatnonzero(starts)
        self.nonstarts = np.flatnonzero(~starts)
        self.n_seg = len(self.starts)
        self._ll_const = -0.5 * n * LOG_2PI - n * math.log(self.y_scale)

        informative = dict(prior.informative or {})
        unknown = set(informative) - set(design.columns)
        if unknown:
            raise ValueError(f"informative prior names unknown coefficients: {sorted(unknown)}")
        self.inf_idx = np.array([design.columns.index(c) for c in informative], dtype=int)
        self.inf_mean = np.array([informative[c][0] for c in informative], dtype=float)
        self.inf_sd = np.array([informative[c][1] for c in informative], dtype=float)
        t_mask = np.ones(p, dtype=bool)
        t_mask[self.inf_idx] = False
        self.t_idx = np.flatnonzero(t_mask)
        self.model = self._kernel_model()

    @property
    def param_names(self) -> list[str]:
        names = list(self.design.columns) + ["sigma"]
        if self.ar1:
            names.append("rho")
        return names

    # --- transforms ---------------------------------------------------

    def to_unconstrained(self, params: ParameterDraw) -> np.ndarray:
        q = np.empty(self.dim)
        q[: self.p] = np.linalg.solve(self.A, params.coef - self.raw_offset)
        q[self.p] = math.log(params.sigma / self.y_scale)
        if self.ar1:
            q[self.p + 1] = math.atanh(params.rho)
        return q

    def constrain(self, q: np.ndarray) -> np.ndarray:
        """Raw-unit parameter rows ``[coef..., sigma, (rho)]`` for unconstrained rows ``q``."""
        q = np.atleast_2d(q)
        out = np.empty_like(q)
        out[:, : self.p] = self.raw_offset + q[:, : self.p] @ self.A.T
        out[:, self.p] = self.y_scale * np.exp(q[:, self.p])
        if self.ar1:
            out[:, self.p + 1] = np.tanh(q[:, self.p + 1])
        return out

    def from_unconstrained(self, q: np.ndarray) -> ParameterDraw:
        row = self.constrain(q)[0]
        return ParameterDraw(row[: self.p], float(row[self.p]), float(row[self.p + 1]) if self.ar1 else 0.0)

    # --- density --------------------------------------------------------

    def _kernel_model(self) -> tuple:
        pr = self.prior
        t_const = float(
            gammaln((pr.df + 1) / 2) - gammaln(pr.df / 2) - 0.5 * math.log(pr.df * math.pi) - math.log(pr.scale)
        )
        const = self._ll_const + math.log(2.0) - 0.5 * LOG_2PI * len(self.inf_idx)
        return (
            np.ascontiguousarray(self.Xs),
            np.ascontiguousarray(self.ys),
            np.ascontiguousarray(self.design.segment_starts),
            self.ar1,
            float(pr.df),
            float(pr.location),
            float(pr.scale),
            t_const,
            self.t_idx.astype(np.int64),
            self.inf_idx.astype(np.int64),
            self.inf_mean,
            self.inf_sd,
            np.ascontiguousarray(self.A[self.inf_idx]),
            self.raw_offset[self.inf_idx].copy(),
            const,
        )

    def logp_grad(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        lp = np.empty(len(q))
        grad = np.empty_like(q)
        for i, row in enumerate(q):
            lp[i] = logp_grad_row(np.ascontiguousarray(row), grad[i], self.model)
        return lp, grad

    def logp(self, q: np.ndarray) -> np.ndarray:
        return self.logp_grad(q)[0]


def log_posterior(params: ParameterDraw, design: DesignMatrix, prior: Prior, ar1: bool) -> float:
    """Unnormalized log-posterior at ``params``, including transform Jacobians."""
    post = LogPosterior(design, prior, ar1)
    with np.errstate(all="ignore"):
        lp = float(post.logp(post.to_unconstrained(params))[0])
    return lp if np.isfinite(lp) else -math.inf


def grad_log_posterior(params: ParameterDraw, design: DesignMatrix, prior: Prior, ar1: bool) -> np.ndarray:
    """Gradient of :func:`log_posterior` with respect to the unconstrained coordinates."""
    post = LogPosterior(design, prior, ar1)
    return post.logp_grad(post.to_unconstrained(params))[1][0]
