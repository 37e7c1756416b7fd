"""Split R-hat, effective sample size and Monte Carlo standard error."""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientDataError


def _as_chains(draws, parameter: str | None) -> np.ndarray:
    if parameter is not None:
        arr = draws.param(parameter)
    else:
        arr = draws
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a (chains, draws) array")
    if arr.shape[0] < 2 or arr.shape[1] < 4:
        raise InsufficientDataError("need at least 2 chains with 4 draws each")
    return arr


def _split(arr: np.ndarray) -> np.ndarray:
    half = arr.shape[1] // 2
    return np.vstack([arr[:, :half], arr[:, arr.shape[1] - half :]])


def rhat(draws, parameter: str | None = None) -> float:
    """Split R-hat; 1.0 for chains that are all constant and equal.

    ``draws`` is a :class:`PosteriorDraws` (then ``parameter`` names the
    quantity) or a ``(chains, draws)`` array.
    """
    x = _split(_as_chains(draws, parameter))
    m, n = x.shape
    if np.ptp(x) == 0:
        return 1.0
    if np.all(np.ptp(x, axis=1) == 0):
        return float("inf")
    chain_mean = x.mean(axis=1)
    w = x.var(axis=1, ddof=1).mean()
    b = n * chain_mean.var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else float("inf")
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    size = 1 << (2 * n - 1).bit_length()
    xc = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(xc, size, axis=-1)
    return np.fft.irfft(f * np.conjugate(f), size, axis=-1)[..., :n] / n


def ess(draws, parameter: str | None = None) -> float:
    """Multi-chain effective sample size (split chains, Geyer initial monotone sequence)."""
    x = _split(_as_chains(draws, parameter))
    m, n = x.shape
    if np.ptp(x) == 0:
        return float(m * n)
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    var_plus = w * (n - 1) / n + x.mean(axis=1).var(ddof=1)
    if var_plus == 0:
        return float(m * n)
    rho_hat = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho_hat[0] = 1.0
    # pair sums Gamma_k = rho_{2k} + rho_{2k+1}, truncated at the first negative pair
    n_pairs = n // 2
    gam = rho_hat[0 : 2 * n_pairs : 2] + rho_hat[1 : 2 * n_pairs : 2]
    neg = np.flatnonzero(gam < 0)
    gam = gam[: neg[0]] if len(neg) else gam
    gam = np.minimum.accumulate(gam)
    tau = -1.0 + 2.0 * gam.sum()
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(m * n / tau)


def mcse_mean(draws, parameter: str | None = None) -> float:
    x = _as_chains(draws, parameter)
    return float(x.std(ddof=1) / np.sqrt(ess(x)))
