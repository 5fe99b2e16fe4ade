"""Pure-numpy implementation of the pointwise kernels.

Used when the compiled extension ``_kernels`` is unavailable.  Both backends
implement the same contract and are cross-checked by the test suite.

Pointwise problem
-----------------
For a divergence with generator derivative ``psi`` (in ``t = log(g/f)``),
the stationarity conditions of the two Lagrangians read::

    psi(t0) = ((1-u) z**u       - mu0) / lam0
    psi(t1) = (u     z**(u-1)   - mu1) / lam1
    log z   = log l + t1 - t0

With ``w = log z`` the map ``F(w) = w - log l - t1(w) + t0(w)`` is strictly
increasing, so every grid point has exactly one root inside the common
feasible interval of ``w``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InfeasibleParameterError
from .solvers import lambert_w0_exp  # noqa: F401  re-exported for the backend switch

KL, ALPHA, SYM = 0, 1, 2
_MAX_IT = 200
_TMAX = 700.0


def psi(t, family, alpha):
    """Generator derivative at ``x = exp(t)``."""
    if family == KL:
        return t + 1.0
    if family == ALPHA:
        return (1.0 - np.exp((alpha - 1.0) * t)) / (1.0 - alpha)
    return (1.0 - alpha * np.exp((alpha - 1.0) * t) - (1.0 - alpha) * np.exp(-alpha * t)) / (alpha * (1.0 - alpha))


def dpsi_dt(t, family, alpha):
    if family == KL:
        return np.ones_like(t)
    if family == ALPHA:
        return np.exp((alpha - 1.0) * t)
    return np.exp((alpha - 1.0) * t) + np.exp(-alpha * t)


def psi_range(family, alpha):
    """``(vmin, vmax)`` of ``psi`` over the real line (open interval)."""
    if family == ALPHA:
        b = 1.0 / (1.0 - alpha)
        return (-math.inf, b) if alpha < 1 else (b, math.inf)
    if family == SYM and 0 < alpha < 1:
        return (-math.inf, 1.0 / (alpha * (1.0 - alpha)))
    return (-math.inf, math.inf)


def _sym_psi_inverse(v, alpha, t_init=None):
    v = np.asarray(v, dtype=float)
    lo = np.full(v.shape, -1.0)
    hi = np.full(v.shape, 1.0)
    for _ in range(12):
        m = psi(lo, SYM, alpha) > v
        if not m.any():
            break
        lo = np.where(m, np.maximum(2.0 * lo, -_TMAX), lo)
    for _ in range(12):
        m = psi(hi, SYM, alpha) < v
        if not m.any():
            break
        hi = np.where(m, np.minimum(2.0 * hi, _TMAX), hi)
    t = 0.5 * (lo + hi) if t_init is None else np.clip(t_init, lo, hi)
    for _ in range(_MAX_IT):
        f = psi(t, SYM, alpha) - v
        lo = np.where(f < 0, t, lo)
        hi = np.where(f > 0, t, hi)
        tn = t - f / dpsi_dt(t, SYM, alpha)
        out = ~((tn > lo) & (tn < hi))
        tn = np.where(out, 0.5 * (lo + hi), tn)
        done = np.abs(tn - t) <= 1e-15 * (1.0 + np.abs(t))
        t = tn
        if done.all():
            break
    return t


def psi_inverse(v, family, alpha, t_init=None):
    """``t`` with ``psi(t) = v``; ``v`` must lie inside :func:`psi_range`."""
    v = np.asarray(v, dtype=float)
    if family == KL:
        return v - 1.0
    if family == ALPHA:
        return np.log1p(-(1.0 - alpha) * v) / (alpha - 1.0)
    return _sym_psi_inverse(v, alpha, t_init)


def w_domain(family, alpha, u, lam0, mu0, lam1, mu1):
    """Open interval of ``w = log z`` on which both ``psi`` inversions exist."""
    vmin, vmax = psi_range(family, alpha)
    wlo, whi = -math.inf, math.inf
    if vmax < math.inf:
        r0 = lam0 * vmax + mu0
        r1 = lam1 * vmax + mu1
        if r0 <= 0 or r1 <= 0:
            return None
        whi = min(whi, math.log(r0 / (1.0 - u)) / u)
        wlo = max(wlo, math.log(r1 / u) / (u - 1.0))
    if vmin > -math.inf:
        r0 = lam0 * vmin + mu0
        r1 = lam1 * vmin + mu1
        if r0 > 0:
            wlo = max(wlo, math.log(r0 / (1.0 - u)) / u)
        if r1 > 0:
            whi = min(whi, math.log(r1 / u) / (u - 1.0))
    if not wlo < whi:
        return None
    return wlo, whi


def _eval_f(w, log_l, family, alpha, u, lam0, mu0, lam1, mu1, t0=None, t1=None):
    e0 = np.exp(u * w)
    e1 = np.exp((u - 1.0) * w)
    v0 = ((1.0 - u) * e0 - mu0) / lam0
    v1 = (u * e1 - mu1) / lam1
    t0 = psi_inverse(v0, family, alpha, t0)
    t1 = psi_inverse(v1, family, alpha, t1)
    f = w - log_l - t1 + t0
    dv0 = u * (1.0 - u) * e0 / lam0
    dv1 = u * (u - 1.0) * e1 / lam1
    df = 1.0 + dv0 / dpsi_dt(t0, family, alpha) - dv1 / dpsi_dt(t1, family, alpha)
    return f, df, t0, t1


def solve_lrf(log_l, family, alpha, u, lam0, mu0, lam1, mu1, w_init=None):
    """Solve the pointwise coupling for every grid point.

    Returns ``(w, t0, t1)``: log robust likelihood ratio and the log-ratios
    ``log(g0/f0)``, ``log(g1/f1)`` (unnormalized for the KL family).
    """
    log_l = np.asarray(log_l, dtype=float)
    dom = w_domain(family, alpha, u, lam0, mu0, lam1, mu1)
    if dom is None:
        raise InfeasibleParameterError(
            "no admissible likelihood ratio: the power bases are non-positive for every z",
            {"family": family, "alpha": alpha, "u": u, "params": (lam0, mu0, lam1, mu1), "index": 0})
    wlo, whi = dom
    # keep strictly inside the domain: psi_inverse diverges at finite ends
    span = whi - wlo
    pad = 1e-12 * (1.0 + abs(wlo) + abs(whi)) if math.isfinite(span) else 0.0
    lo_lim = wlo + pad if math.isfinite(wlo) else -math.inf
    hi_lim = whi - pad if math.isfinite(whi) else math.inf

    w = log_l.copy() if w_init is None else np.array(w_init, dtype=float)
    if math.isfinite(span):
        w = np.clip(w, wlo + 0.25 * span, whi - 0.25 * span)
    else:
        w = np.clip(w, lo_lim + 1.0 if math.isfinite(wlo) else -math.inf, hi_lim - 1.0 if math.isfinite(whi) else math.inf)

    lo = np.full(w.shape, lo_lim)
    hi = np.full(w.shape, hi_lim)
    # bracket expansion on the unbounded sides
    if not math.isfinite(wlo):
        step = np.ones_like(w)
        cand = w - step
        for _ in range(80):
            f, *_ = _eval_f(cand, log_l, family, alpha, u, lam0, mu0, lam1, mu1)
            bad = f > 0
            if not bad.any():
                break
            step = np.where(bad, 2.0 * step, step)
            cand = np.where(bad, w - step, cand)
        lo = cand
    if not math.isfinite(whi):
        step = np.ones_like(w)
        cand = w + step
        for _ in range(80):
            f, *_ = _eval_f(cand, log_l, family, alpha, u, lam0, mu0, lam1, mu1)
            bad = f < 0
            if not bad.any():
                break
            step = np.where(bad, 2.0 * step, step)
            cand = np.where(bad, w + step, cand)
        hi = cand
    w = np.clip(w, lo, hi)

    t0 = t1 = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(_MAX_IT):
            f, df, t0, t1 = _eval_f(w, log_l, family, alpha, u, lam0, mu0, lam1, mu1, t0, t1)
            lo = np.where(f < 0, w, lo)
            hi = np.where(f > 0, w, hi)
            wn = w - f / df
            out = ~((wn > lo) & (wn < hi)) | ~np.isfinite(wn)
            wn = np.where(out, 0.5 * (lo + hi), wn)
            done = (np.abs(wn - w) <= 4e-16 * (1.0 + np.abs(w))) | (f == 0)
            w = wn
            if done.all():
                break
    return _finish(w, log_l, family, alpha, u, lam0, mu0, lam1, mu1, t0, t1)


def _finish(w, log_l, family, alpha, u, lam0, mu0, lam1, mu1, t0, t1):
    # Near a domain end one log-ratio reacts to w far more strongly than the
    # other; rebuild that one from the coupling so it holds to rounding.
    e0 = np.exp(u * w)
    e1 = np.exp((u - 1.0) * w)
    t0 = psi_inverse(((1.0 - u) * e0 - mu0) / lam0, family, alpha, t0)
    t1 = psi_inverse((u * e1 - mu1) / lam1, family, alpha, t1)
    s0 = u * (1.0 - u) * e0 / lam0 / dpsi_dt(t0, family, alpha)
    s1 = u * (1.0 - u) * e1 / lam1 / dpsi_dt(t1, family, alpha)
    fix1 = s1 >= s0
    t1 = np.where(fix1, w - log_l + t0, t1)
    t0 = np.where(fix1, t0, t1 + log_l - w)
    return w, t0, t1
