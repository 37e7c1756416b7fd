"""Compiled inner loops: one log-posterior/gradient evaluation and one leapfrog trajectory.

``model`` is the tuple built by ``LogPosterior._kernel_model``; see that
method for the field order.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, error_model="numpy")
def _t_term(x, df, loc, scale):
    d = x - loc
    z = d / scale
    return -(df + 1.0) / 2.0 * math.log1p(z * z / df), -(df + 1.0) * d / (df * scale * scale + d * d)


@njit(cache=True, error_model="numpy")
def logp_grad_row(q, grad, model):
    (Xs, ys, is_start, ar1, df, loc, scale, t_const, t_idx,
     inf_idx, inf_mean, inf_sd, A_inf, off_inf, const) = model
    n, p = Xs.shape
    log_sig = q[p]
    sig = math.exp(log_sig)
    inv_var = math.exp(-2.0 * log_sig)
    e = np.empty(n)
    for t in range(n):
        acc = ys[t]
        for j in range(p):
            acc -= Xs[t, j] * q[j]
        e[t] = acc
    for j in range(q.shape[0]):
        grad[j] = 0.0
    dlde = np.zeros(n)
    ss = 0.0
    if ar1:
        rho = math.tanh(q[p + 1])
        c2 = 1.0 - rho * rho
        c = math.sqrt(c2)
        n_seg = 0
        dll_drho = 0.0
        for t in range(n):
            if is_start[t]:
                u = c * e[t]
                w = u * inv_var
                n_seg += 1
                dlde[t] -= c * w
                dll_drho += rho / c * w * e[t]
            else:
                u = e[t] - rho * e[t - 1]
                w = u * inv_var
                dlde[t] -= w
                dlde[t - 1] += rho * w
                dll_drho += w * e[t - 1]
            ss += u * u
        dll_drho -= n_seg * rho / c2
        lp = -n * log_sig + 0.5 * n_seg * math.log(c2) - 0.5 * ss * inv_var
        # Jacobian of rho = tanh(x) and the t prior on rho
        lp += math.log(c2)
        tv, td = _t_term(rho, df, loc, scale)
        lp += t_const + tv
        grad[p + 1] = dll_drho * c2 - 2.0 * rho + td * c2
    else:
        for t in range(n):
            ss += e[t] * e[t]
            dlde[t] = -e[t] * inv_var
        lp = -n * log_sig - 0.5 * ss * inv_var
    for j in range(p):
        acc = 0.0
        for t in range(n):
            acc -= dlde[t] * Xs[t, j]
        grad[j] = acc
    grad[p] += -n + ss * inv_var
    # half-t prior on sigma_std plus log-Jacobian of sigma = exp(x)
    tv, td = _t_term(sig, df, loc, scale)
    lp += t_const + tv + log_sig
    grad[p] += td * sig + 1.0
    for k in range(t_idx.shape[0]):
        j = t_idx[k]
        tv, td = _t_term(q[j], df, loc, scale)
        lp += t_const + tv
        grad[j] += td
    for k in range(inf_idx.shape[0]):
        raw = off_inf[k]
        for j in range(p):
            raw += A_inf[k, j] * q[j]
        z = (raw - inf_mean[k]) / inf_sd[k]
        lp -= 0.5 * z * z + math.log(inf_sd[k])
        for j in range(p):
            grad[j] -= z / inf_sd[k] * A_inf[k, j]
    return lp + const


@njit(cache=True, error_model="numpy")
def _kinetic(p, inv_metric):
    d = p.shape[0]
    k = 0.0
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += inv_metric[i, j] * p[j]
        k += p[i] * acc
    return 0.5 * k


@njit(cache=True, error_model="numpy")
def trajectory(q, p, g, lp, eps, inv_metric, n_steps, max_err, model):
    """Leapfrog ``n_steps`` from (q, p); returns the end state and a divergence flag.

    ``inv_metric`` is the full (d, d) inverse mass matrix.
    """
    d = q.shape[0]
    h0 = -lp + _kinetic(p, inv_metric)
    q = q.copy()
    p = p.copy()
    g = g.copy()
    q_new = np.empty(d)
    g_new = np.empty(d)
    p_try = np.empty(d)
    for j in range(d):
        p[j] += 0.5 * eps * g[j]
    for k in range(n_steps):
        for i in range(d):
            v = 0.0
            for j in range(d):
                v += inv_metric[i, j] * p[j]
            q_new[i] = q[i] + eps * v
        lp_new = logp_grad_row(q_new, g_new, model)
        step = 0.5 * eps if k == n_steps - 1 else eps
        for j in range(d):
            p_try[j] = p[j] + step * g_new[j]
        h = -lp_new + _kinetic(p_try, inv_metric)
        if not np.isfinite(h) or h - h0 > max_err:
            return q, p, g, lp, True
        for j in range(d):
            p[j] = p_try[j]
            q[j] = q_new[j]
            g[j] = g_new[j]
        lp = lp_new
    return q, p, g, lp, False
