"""Log-MGFs, large-deviation rate functions, Chernoff exponents and Monte Carlo error rates.

The test statistic is ``X = log lrf(Y)`` and ``S_n`` is the mean of ``n``
i.i.d. copies.  Under hypothesis ``j`` with data density ``g_j`` the rate
function is the Legendre transform of ``Lambda_j(u) = log E_{g_j}[lrf(Y)**u]``,
so ``P_F ~ exp(-n I0(t))`` for ``t > E_0[X]`` and ``P_M ~ exp(-n I1(t))`` for
``t < E_1[X]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .density import GridDensity, sample
from .errors import NumericError, ParameterError, RangeError
from .lfd_bayes import LfdSolution, RobustLrf
from .solvers import golden_section

U_MAX = 50.0


def _check(lrf: RobustLrf, data: GridDensity):
    if lrf.grid != data.grid:
        raise ParameterError("lrf and data density live on different grids")


def _tilted(lrf, data, u):
    """``(Lambda(u), Lambda'(u), Lambda''(u))`` for the normalized data density."""
    x = lrf.log_values
    base = data.log_values + data.grid.log_weights
    m0 = np.max(base)
    log_mass = m0 + math.log(np.sum(np.exp(base - m0)))
    a = u * x + base
    m = np.max(a)
    p = np.exp(a - m)
    z = p.sum()
    lam = m + math.log(z) - log_mass
    mean = float(p @ x) / z
    var = float(p @ (x - mean) ** 2) / z
    return lam, mean, var


def log_mgf(lrf: RobustLrf, data: GridDensity, u: float) -> float:
    """``log E_data[lrf(Y)**u]`` with max-log shifting; exactly 0 at ``u = 0``."""
    _check(lrf, data)
    if not math.isfinite(u):
        raise ParameterError(f"u must be finite, got {u}")
    if u == 0:
        return 0.0
    lam = _tilted(lrf, data, u)[0]
    if not math.isfinite(lam):
        raise NumericError(f"log-MGF is not finite at u={u}")
    return float(lam)


def mean_statistic(lrf: RobustLrf, data: GridDensity) -> float:
    """``E_data[log lrf(Y)]``."""
    _check(lrf, data)
    return _tilted(lrf, data, 0.0)[1]


def _legendre(lrf, data, t):
    """``(sup_u (t u - Lambda(u)), argmax)`` by safeguarded Newton on ``Lambda'(u) = t``."""
    lo, hi = -1.0, 1.0
    while _tilted(lrf, data, lo)[1] > t:
        if lo <= -U_MAX:
            raise RangeError(f"rate function at t={t}: supremum lies below u=-{U_MAX}")
        lo = max(2.0 * lo, -U_MAX)
    while _tilted(lrf, data, hi)[1] < t:
        if hi >= U_MAX:
            raise RangeError(f"rate function at t={t}: supremum lies above u={U_MAX}")
        hi = min(2.0 * hi, U_MAX)
    u = 0.0 if lo < 0.0 < hi else 0.5 * (lo + hi)
    for _ in range(200):
        _, d1, d2 = _tilted(lrf, data, u)
        g = d1 - t
        if g == 0.0:
            break
        if g < 0:
            lo = u
        else:
            hi = u
        un = u - g / d2 if d2 > 0 else 0.5 * (lo + hi)
        if not (lo < un < hi):
            un = 0.5 * (lo + hi)
        if abs(un - u) <= 1e-15 * (1.0 + abs(u)):
            u = un
            break
        u = un
    lam = _tilted(lrf, data, u)[0] if u != 0.0 else 0.0
    val = t * u - lam
    if not math.isfinite(val):
        # fall back to a derivative-free search on the concave objective
        u, neg = golden_section(lambda v: -(t * v - _tilted(lrf, data, v)[0]), -U_MAX, U_MAX, tol=1e-12)
        val = -neg
    return max(float(val), 0.0), float(u)


def rate_function(lrf: RobustLrf, data: GridDensity, t: float, hypothesis: str = "H0") -> float:
    """Cramer rate ``I(t) = sup_u (t u - log E_data[lrf**u])``.

    For ``hypothesis="H1"`` Cramer's theorem is applied to ``-X``; after the
    substitution ``u -> -u`` this is the same Legendre transform, now of the
    log-MGF under the ``H1`` data density.  ``hypothesis`` only documents
    which tail the caller is interested in (upper tail for H0, lower for H1).
    """
    _check(lrf, data)
    if hypothesis not in ("H0", "H1"):
        raise ParameterError(f"hypothesis must be 'H0' or 'H1', got {hypothesis!r}")
    if not math.isfinite(t):
        raise ParameterError(f"t must be finite, got {t}")
    return _legendre(lrf, data, float(t))[0]


@dataclass
class RateCurve:
    t_grid: np.ndarray
    i0: np.ndarray
    i1: np.ndarray
    test_tag: str = ""
    data_tag: str = ""
    valid: tuple = field(default=(-math.inf, math.inf))

    def write_csv(self, path, header_comment=None):
        with open(path, "w") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write("t,i0,i1,test_tag,data_tag\n")
            for t, a, b in zip(self.t_grid, self.i0, self.i1):
                fa = "nan" if not math.isfinite(a) else f"{a:.17g}"
                fb = "nan" if not math.isfinite(b) else f"{b:.17g}"
                fh.write(f"{t:.17g},{fa},{fb},{self.test_tag},{self.data_tag}\n")


def rate_curves(lrf: RobustLrf, data0: GridDensity, data1: GridDensity, t_grid,
                test_tag: str = "", data_tag: str = "") -> RateCurve:
    """Tabulate ``I0`` under ``data0`` and ``I1`` under ``data1``.

    Thresholds outside the open interval ``(E_0[X], E_1[X])`` are marked with
    ``nan`` and not evaluated.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    e0, e1 = mean_statistic(lrf, data0), mean_statistic(lrf, data1)
    i0 = np.full(t_grid.shape, np.nan)
    i1 = np.full(t_grid.shape, np.nan)
    for k, t in enumerate(t_grid):
        if e0 < t < e1:
            i0[k] = rate_function(lrf, data0, t, "H0")
            i1[k] = rate_function(lrf, data1, t, "H1")
    return RateCurve(t_grid, i0, i1, test_tag, data_tag, (e0, e1))


def optimal_threshold(lrf: RobustLrf, g0_matched: GridDensity, g1_matched: GridDensity) -> float:
    """``argmax_t min(I0(t), I1(t))``.

    ``I0`` increases and ``I1`` decreases on ``(E_0[X], E_1[X])``, so the
    maximizer is their crossing; it is located by Brent's method.  When the
    data are the densities that built ``lrf`` the crossing is at ``t = 0``.
    """
    e0, e1 = mean_statistic(lrf, g0_matched), mean_statistic(lrf, g1_matched)
    if not e0 < e1:
        raise ParameterError(f"need E_0[X] < E_1[X], got {e0} >= {e1}")

    def gap(t):
        return rate_function(lrf, g0_matched, t, "H0") - rate_function(lrf, g1_matched, t, "H1")

    return float(brentq(gap, e0, e1, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=300))


def chernoff_exponent(sol, g1: GridDensity | None = None) -> float:
    """``-min_{u in (0,1)} log D_u(g0, g1)``.

    ``sol`` is an :class:`LfdSolution` or, together with ``g1``, the density
    ``g0`` of a pair.  The minimum is found by golden section on the convex
    function ``u -> log D_u``.
    """
    if isinstance(sol, LfdSolution):
        g0, g1 = sol.g0_hat, sol.g1_hat
    else:
        g0 = sol
        if g1 is None:
            raise ParameterError("chernoff_exponent needs an LfdSolution or two densities")
    lrf = RobustLrf.from_densities(g0, g1)
    _, val = golden_section(lambda u: log_mgf(lrf, g0, u), 0.0, 1.0, tol=1e-12)
    return -float(val)


@dataclass
class McEstimate:
    n_values: np.ndarray
    pf_hat: np.ndarray
    pm_hat: np.ndarray
    trials: int
    seed: int
    t: float
    pf_zero: np.ndarray = None
    pm_zero: np.ndarray = None

    def decay_rate(self, which="pf") -> float:
        """Least-squares slope of ``-log p_hat`` versus ``n`` over the non-zero cells."""
        p = self.pf_hat if which == "pf" else self.pm_hat
        keep = p > 0
        if keep.sum() < 2:
            raise NumericError("fewer than two non-zero estimates; cannot fit a decay rate")
        slope, _ = np.polyfit(self.n_values[keep].astype(float), -np.log(p[keep]), 1)
        return float(slope)

    def write_csv(self, path, header_comment=None):
        with open(path, "w") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write("n,pf_hat,pm_hat\n")
            for n, a, b in zip(self.n_values, self.pf_hat, self.pm_hat):
                fh.write(f"{int(n)},{a:.17g},{b:.17g}\n")


def _mean_statistic_draws(lrf, data, n, trials, rng, block=2_000_000):
    """Sample means of ``log lrf`` over ``trials`` blocks of ``n`` draws."""
    out = np.empty(trials)
    rows = max(1, block // n)
    y, x = lrf.y, lrf.log_values
    for start in range(0, trials, rows):
        m = min(rows, trials - start)
        draws = sample(data, m * n, rng)
        out[start:start + m] = np.interp(draws, y, x).reshape(m, n).mean(axis=1)
    return out


def monte_carlo_error(lrf: RobustLrf, data0: GridDensity, data1: GridDensity, n_values, trials: int,
                      t: float, seed: int = 0) -> McEstimate:
    """Empirical ``P_F = P_0(S_n > t)`` and ``P_M = P_1(S_n <= t)``.

    Each ``(n, hypothesis)`` cell draws from its own stream spawned from
    ``seed``, so results do not depend on evaluation order.  Cells without
    events are reported as 0 and flagged in ``pf_zero`` / ``pm_zero``.
    """
    _check(lrf, data0)
    _check(lrf, data1)
    if int(trials) != trials or trials < 1000:
        raise ParameterError(f"trials must be an integer >= 1000, got {trials}")
    n_values = np.asarray(n_values, dtype=int)
    if n_values.ndim != 1 or n_values.size == 0 or np.any(n_values < 1):
        raise ParameterError("n_values must be a non-empty list of positive integers")
    streams = np.random.SeedSequence(seed).spawn(2 * n_values.size)
    pf = np.empty(n_values.size)
    pm = np.empty(n_values.size)
    for k, n in enumerate(n_values):
        s0 = _mean_statistic_draws(lrf, data0, int(n), int(trials), np.random.default_rng(streams[2 * k]))
        s1 = _mean_statistic_draws(lrf, data1, int(n), int(trials), np.random.default_rng(streams[2 * k + 1]))
        pf[k] = np.mean(s0 > t)
        pm[k] = np.mean(s1 <= t)
    return McEstimate(n_values, pf, pm, int(trials), seed, float(t), pf == 0, pm == 0)


__all__ = [
    "McEstimate", "RateCurve", "U_MAX", "chernoff_exponent", "log_mgf", "mean_statistic", "monte_carlo_error",
    "optimal_threshold", "rate_curves", "rate_function",
]
