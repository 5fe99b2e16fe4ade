# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pointwise kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs, INFINITY, NAN, isfinite, isnan, sqrt

from .errors import InfeasibleParameterError
from ._kernels_py import w_domain

cnp.import_array()

cdef enum:
    KL = 0
    ALPHA = 1
    SYM = 2
    MAX_IT = 200

cdef double TMAX = 700.0
cdef double E = 2.718281828459045


cdef inline double psi(double t, int fam, double a) nogil:
    if fam == KL:
        return t + 1.0
    if fam == ALPHA:
        return (1.0 - exp((a - 1.0) * t)) / (1.0 - a)
    return (1.0 - a * exp((a - 1.0) * t) - (1.0 - a) * exp(-a * t)) / (a * (1.0 - a))


cdef inline double dpsi(double t, int fam, double a) nogil:
    if fam == KL:
        return 1.0
    if fam == ALPHA:
        return exp((a - 1.0) * t)
    return exp((a - 1.0) * t) + exp(-a * t)


cdef double sym_psi_inv(double v, double a, double t_init) nogil:
    cdef double lo = -1.0, hi = 1.0, t, f, tn
    cdef int k
    for k in range(12):
        if psi(lo, SYM, a) <= v:
            break
        lo = 2.0 * lo
        if lo < -TMAX:
            lo = -TMAX
    for k in range(12):
        if psi(hi, SYM, a) >= v:
            break
        hi = 2.0 * hi
        if hi > TMAX:
            hi = TMAX
    if isnan(t_init) or not (t_init > lo and t_init < hi):
        t = 0.5 * (lo + hi)
    else:
        t = t_init
    for k in range(MAX_IT):
        f = psi(t, SYM, a) - v
        if f == 0.0:
            return t
        if f < 0:
            lo = t
        else:
            hi = t
        tn = t - f / dpsi(t, SYM, a)
        if not (tn > lo and tn < hi):
            tn = 0.5 * (lo + hi)
        if fabs(tn - t) <= 1e-15 * (1.0 + fabs(t)):
            return tn
        t = tn
    return t


cdef inline double psi_inv(double v, int fam, double a, double t_init) nogil:
    if fam == KL:
        return v - 1.0
    if fam == ALPHA:
        return log1p(-(1.0 - a) * v) / (a - 1.0)
    return sym_psi_inv(v, a, t_init)


cdef struct Params:
    int fam
    double a, u, lam0, mu0, lam1, mu1


cdef inline double eval_f(double w, double logl, Params* p, double* df, double* t0, double* t1) nogil:
    cdef double e0 = exp(p.u * w)
    cdef double e1 = exp((p.u - 1.0) * w)
    cdef double v0 = ((1.0 - p.u) * e0 - p.mu0) / p.lam0
    cdef double v1 = (p.u * e1 - p.mu1) / p.lam1
    t0[0] = psi_inv(v0, p.fam, p.a, t0[0])
    t1[0] = psi_inv(v1, p.fam, p.a, t1[0])
    df[0] = 1.0 + p.u * (1.0 - p.u) * e0 / p.lam0 / dpsi(t0[0], p.fam, p.a) \
        + p.u * (1.0 - p.u) * e1 / p.lam1 / dpsi(t1[0], p.fam, p.a)
    return w - logl - t1[0] + t0[0]


cdef void solve_point(double logl, double w, double lo_lim, double hi_lim, double wlo, double whi,
                      Params* p, double* w_out, double* t0_out, double* t1_out) nogil:
    cdef double lo, hi, step, f, df, wn, t0 = NAN, t1 = NAN, s0, s1, e0, e1
    cdef int k
    # bracket
    if isfinite(wlo):
        lo = lo_lim
    else:
        step = 1.0
        lo = w - step
        for k in range(80):
            f = eval_f(lo, logl, p, &df, &t0, &t1)
            if f <= 0:
                break
            step *= 2.0
            lo = w - step
    if isfinite(whi):
        hi = hi_lim
    else:
        step = 1.0
        hi = w + step
        for k in range(80):
            f = eval_f(hi, logl, p, &df, &t0, &t1)
            if f >= 0:
                break
            step *= 2.0
            hi = w + step
    if w < lo:
        w = lo
    if w > hi:
        w = hi
    t0 = NAN
    t1 = NAN
    for k in range(MAX_IT):
        f = eval_f(w, logl, p, &df, &t0, &t1)
        if f == 0.0:
            break
        if f < 0:
            lo = w
        else:
            hi = w
        wn = w - f / df
        if not (wn > lo and wn < hi):
            wn = 0.5 * (lo + hi)
        if fabs(wn - w) <= 4e-16 * (1.0 + fabs(w)):
            w = wn
            break
        w = wn
    # rebuild the stiffer log-ratio from the coupling
    e0 = exp(p.u * w)
    e1 = exp((p.u - 1.0) * w)
    t0 = psi_inv(((1.0 - p.u) * e0 - p.mu0) / p.lam0, p.fam, p.a, t0)
    t1 = psi_inv((p.u * e1 - p.mu1) / p.lam1, p.fam, p.a, t1)
    s0 = p.u * (1.0 - p.u) * e0 / p.lam0 / dpsi(t0, p.fam, p.a)
    s1 = p.u * (1.0 - p.u) * e1 / p.lam1 / dpsi(t1, p.fam, p.a)
    if s1 >= s0:
        t1 = w - logl + t0
    else:
        t0 = t1 + logl - w
    w_out[0] = w
    t0_out[0] = t0
    t1_out[0] = t1


def solve_lrf(log_l, int family, double alpha, double u, double lam0, double mu0,
              double lam1, double mu1, w_init=None):
    """Solve the pointwise coupling at every grid point; returns ``(w, t0, t1)``."""
    cdef double[::1] ll = np.ascontiguousarray(log_l, dtype=np.float64)
    cdef Py_ssize_t n = ll.shape[0], i
    dom = w_domain(family, alpha, u, lam0, mu0, lam1, mu1)
    if dom is None:
        raise InfeasibleParameterError(
            "no admissible likelihood ratio: the power bases are non-positive for every z",
            {"family": family, "alpha": alpha, "u": u, "params": (lam0, mu0, lam1, mu1), "index": 0})
    cdef double wlo = dom[0], whi = dom[1]
    cdef double span = whi - wlo
    cdef double pad = 1e-12 * (1.0 + fabs(wlo) + fabs(whi)) if isfinite(span) else 0.0
    cdef double lo_lim = wlo + pad if isfinite(wlo) else -INFINITY
    cdef double hi_lim = whi - pad if isfinite(whi) else INFINITY
    cdef double clo, chi
    if isfinite(span):
        clo = wlo + 0.25 * span
        chi = whi - 0.25 * span
    else:
        clo = lo_lim + 1.0 if isfinite(wlo) else -INFINITY
        chi = hi_lim - 1.0 if isfinite(whi) else INFINITY
    cdef double[::1] w0 = np.ascontiguousarray(log_l if w_init is None else w_init, dtype=np.float64)
    w_arr = np.empty(n)
    t0_arr = np.empty(n)
    t1_arr = np.empty(n)
    cdef double[::1] wv = w_arr, t0v = t0_arr, t1v = t1_arr
    cdef Params p
    p.fam = family
    p.a = alpha
    p.u = u
    p.lam0 = lam0
    p.mu0 = mu0
    p.lam1 = lam1
    p.mu1 = mu1
    cdef double ws
    with nogil:
        for i in range(n):
            ws = w0[i]
            if ws < clo:
                ws = clo
            if ws > chi:
                ws = chi
            solve_point(ll[i], ws, lo_lim, hi_lim, wlo, whi, &p, &wv[i], &t0v[i], &t1v[i])
    return w_arr, t0_arr, t1_arr


cdef double w0_scalar(double x) nogil:
    cdef double w, ew, fw, wp1, denom, dw, p, lx
    cdef int k
    if x == 0.0:
        return 0.0
    if x <= -1.0 / E:
        return -1.0
    if x < -0.25:
        p = sqrt(2.0 * (E * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    elif x > 3.0:
        lx = log(x)
        w = lx - log(lx)
    else:
        w = log1p(x)
    for k in range(60):
        ew = exp(w)
        fw = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * fw / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = fw / denom
        w -= dw
        if fabs(dw) <= 1e-15 * (1.0 + fabs(w)):
            break
    return w


cdef double w0_exp_scalar(double L) nogil:
    cdef double v, f, f1, f2, dv
    cdef int k
    if L < 2.0:
        return w0_scalar(exp(L))
    v = L - log(L)
    for k in range(60):
        f = v + log(v) - L
        f1 = 1.0 + 1.0 / v
        f2 = -1.0 / (v * v)
        dv = f / (f1 - 0.5 * f * f2 / f1)
        v -= dv
        if fabs(dv) <= 1e-15 * fabs(v):
            break
    return v


def lambert_w0_exp(log_x):
    """``W(exp(log_x))`` elementwise."""
    scalar = np.ndim(log_x) == 0
    cdef double[::1] L = np.ascontiguousarray(np.atleast_1d(log_x), dtype=np.float64)
    cdef Py_ssize_t n = L.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = w0_exp_scalar(L[i])
    return float(out[0]) if scalar else out
