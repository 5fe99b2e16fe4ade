"""Numerical kernels: damped Newton, bracketed roots, Lambert W, 1-D minimization."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, DomainError, EvaluationError, RobustLrtError, SolverError

log = logging.getLogger(__name__)

INV_E = math.exp(-1.0)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class NewtonOptions:
    max_iters: int = 200
    tol: float = 1e-10
    damping: float = 0.5
    min_step: float = 1e-12
    fd_step: float = 1e-7
    fd_floor: float = 1e-9
    max_halvings: int = 30

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SolveReport:
    root: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    residual: np.ndarray = field(default=None, repr=False)


def _eval(system, x):
    try:
        r = np.asarray(system(x), dtype=float)
    except (RobustLrtError, FloatingPointError, OverflowError, ZeroDivisionError):
        return None
    if not np.all(np.isfinite(r)):
        return None
    return r


def fd_jacobian(system, x, r, fd_step=1e-7, fd_floor=1e-9):
    """Forward-difference Jacobian; falls back to a backward step where the forward one fails."""
    n = x.size
    jac = np.empty((r.size, n))
    for i in range(n):
        h = max(fd_step * abs(x[i]), fd_floor)
        xp = x.copy()
        xp[i] += h
        rp = _eval(system, xp)
        if rp is None:
            xp[i] = x[i] - h
            rp = _eval(system, xp)
            if rp is None:
                raise SolverError("residual not finite on either side of a difference step",
                                  {"x": x.copy(), "coordinate": i})
            h = -h
        jac[:, i] = (rp - r) / h
    return jac


def damped_newton(system: Callable[[np.ndarray], Sequence[float]], x0, opts: NewtonOptions | None = None) -> SolveReport:
    """Solve ``system(x) = 0`` by Newton steps with backtracking on the max-norm.

    A trial point whose residual is non-finite (or whose evaluation raises one
    of the package errors) is treated like a step that failed to decrease the
    residual.  ``damping == 1`` disables backtracking.
    """
    opts = opts or NewtonOptions()
    x = np.array(x0, dtype=float).ravel()
    r = _eval(system, x)
    if r is None:
        raise SolverError("residual not finite at the starting point", {"x": x})
    if r.size != x.size:
        raise SolverError(f"system maps R^{x.size} to R^{r.size}")
    norm = float(np.max(np.abs(r)))
    it = 0
    while it < opts.max_iters:
        if norm <= opts.tol:
            return SolveReport(x, norm, it, True, r)
        it += 1
        jac = fd_jacobian(system, x, r, opts.fd_step, opts.fd_floor)
        if not np.all(np.isfinite(jac)):
            raise SolverError("non-finite Jacobian", {"x": x, "residual": r})
        cond = np.linalg.cond(jac)
        if not cond <= 1e14:
            raise SolverError(f"singular Jacobian (condition {cond:.3g})", {"x": x, "residual": r, "jacobian": jac})
        step = np.linalg.solve(jac, -r)
        if opts.damping == 1.0:
            trial = x + step
            rt = _eval(system, trial)
            if rt is None:
                raise SolverError("non-finite residual after an undamped step", {"x": x, "residual": r})
            x, r, norm = trial, rt, float(np.max(np.abs(rt)))
            continue
        lam = 1.0
        accepted = False
        for _ in range(opts.max_halvings + 1):
            trial = x + lam * step
            rt = _eval(system, trial)
            if rt is not None:
                nt = float(np.max(np.abs(rt)))
                if nt < norm:
                    x, r, norm = trial, rt, nt
                    accepted = True
                    break
            lam *= opts.damping
            if lam * float(np.max(np.abs(step))) < opts.min_step:
                break
        if not accepted:
            log.debug("damped_newton: line search stalled at |r|=%.3g", norm)
            return SolveReport(x, norm, it, norm <= opts.tol, r)
    return SolveReport(x, norm, it, norm <= opts.tol, r)


def newton_or_raise(system, x0, opts=None, what="system") -> SolveReport:
    rep = damped_newton(system, x0, opts)
    if not rep.converged:
        raise SolverError(f"{what}: Newton did not converge (|r|={rep.residual_norm:.3g} after {rep.iterations} iterations)",
                          {"x": rep.root, "residual": rep.residual})
    return rep


def scalar_root(f: Callable[[float], float], bracket, xtol=1e-14) -> float:
    """Root of ``f`` inside a sign-changing bracket (Brent's method)."""
    a, b = map(float, bracket)
    fa, fb = f(a), f(b)
    if not (math.isfinite(fa) and math.isfinite(fb)):
        raise EvaluationError("non-finite value at a bracket end", a if not math.isfinite(fa) else b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise BracketError(f"no sign change on [{a}, {b}]: f(a)={fa:.3g}, f(b)={fb:.3g}")
    return float(brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500))


# ---------------------------------------------------------------------------
# Lambert W, principal branch
# ---------------------------------------------------------------------------

def _w0_seed(x):
    x = np.asarray(x, dtype=float)
    w = np.log1p(x)
    big = x > 3.0
    lx = np.log(np.where(big, x, 3.0))
    w = np.where(big, lx - np.log(lx), w)
    near = x < -0.25
    p = np.sqrt(np.clip(2.0 * (math.e * x + 1.0), 0.0, 1.0))
    w = np.where(near, -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3, w)
    return w


def lambert_w0(x):
    """Principal branch of Lambert W for real ``x >= -1/e`` (scalar or array).

    Log-based seed refined by Halley iterations.
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("lambert_w0 got NaN")
    if np.any(x < -INV_E):
        # tolerate the rounding of -1/e itself
        if np.any(x < -INV_E * (1 + 4e-16)):
            raise DomainError("lambert_w0 needs x >= -1/e")
        x = np.maximum(x, -INV_E)
    w = _w0_seed(x)
    for _ in range(60):
        ew = np.exp(w)
        fw = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * fw / np.where(wp1 == 0, 1.0, 2.0 * wp1)
        dw = np.where(denom != 0, fw / np.where(denom == 0, 1.0, denom), 0.0)
        w = w - dw
        if np.all(np.abs(dw) <= 1e-15 * (1.0 + np.abs(w))):
            break
    w = np.where(x == 0, 0.0, w)
    w = np.where(x == -INV_E, -1.0, w)
    return float(w) if scalar else w


def lambert_w0_exp(log_x):
    """``W(exp(log_x))`` without forming ``exp(log_x)``; valid for any real ``log_x``."""
    scalar = np.ndim(log_x) == 0
    L = np.asarray(log_x, dtype=float)
    small = L < 2.0
    w = np.empty_like(L)
    if np.any(small):
        w[small] = lambert_w0(np.exp(L[small]))
    big = ~small
    if np.any(big):
        Lb = L[big]
        v = Lb - np.log(Lb)
        # Halley on v + log v - L = 0
        for _ in range(60):
            f = v + np.log(v) - Lb
            f1 = 1.0 + 1.0 / v
            f2 = -1.0 / (v * v)
            dv = f / (f1 - 0.5 * f * f2 / f1)
            v = v - dv
            if np.all(np.abs(dv) <= 1e-15 * np.abs(v)):
                break
        w[big] = v
    return float(w) if scalar else w


def log_lambert_w0_exp(log_x):
    """``log W(exp(log_x))``; stays finite where ``W`` itself underflows."""
    L = np.asarray(log_x, dtype=float)
    out = np.empty_like(L)
    tiny = L < -30.0
    # W(x) = x - x**2 + O(x**3), so log W = log x - x + O(x**2)
    out[tiny] = L[tiny] - np.exp(L[tiny])
    if np.any(~tiny):
        out[~tiny] = np.log(lambert_w0_exp(L[~tiny]))
    return float(out) if np.ndim(log_x) == 0 else out


# ---------------------------------------------------------------------------
# 1-D minimization
# ---------------------------------------------------------------------------

def golden_section(phi, a, b, tol=1e-9, max_iters=200):
    """Golden-section search on ``[a, b]``; returns ``(x, phi(x))``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(max_iters):
        if abs(b - a) <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = phi(d)
    return (c, fc) if fc <= fd else (d, fd)


def minimize_1d(phi: Callable[[float], float], interval, scan_points: int = 49, tol=1e-10):
    """Global-over-scan minimization of a possibly non-convex function.

    Evaluates ``phi`` at ``scan_points`` equally spaced abscissae, then refines
    by golden section between the neighbours of the best scan point.
    """
    a, b = map(float, interval)
    if not b > a:
        raise ValueError(f"need b > a, got ({a}, {b})")
    if scan_points < 8:
        raise ValueError("scan_points must be >= 8")
    xs = np.linspace(a, b, int(scan_points))
    vals = np.empty_like(xs)
    for i, x in enumerate(xs):
        v = float(phi(x))
        if not math.isfinite(v):
            raise EvaluationError(f"objective is not finite at {x}", x)
        vals[i] = v
    k = int(np.argmin(vals))
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, xs.size - 1)]
    x, v = golden_section(phi, lo, hi, tol=tol)
    if not (math.isfinite(v) and v <= vals[k]):
        return float(xs[k]), float(vals[k])
    return float(x), float(v)
