"""Asymptotically minimax robust Neyman-Pearson tests for KL balls, and Dabak's geodesic test.

Type-I minimizes ``KL(G0, G1)`` over the product of the two KL balls.  With
``K0 = 1 + lam0 + mu0`` the stationarity conditions read::

    g1 = exp(K0) g0**(1+lam0) f0**(-lam0)
    g0 = g1 (mu1 + lam1 (1 + log(g1/f1)))

and eliminating ``g1`` leaves ``y e**(kappa y) = exp(kappa B - K0)`` for
``y = g0/g1``, with ``kappa = lam0 / (lam1 (1+lam0))`` and
``B = mu1 + lam1 (1 + K0) - lam1 log l``.  Hence ``y = W(kappa e**(kappa B - K0)) / kappa``
and the Lambert W argument is evaluated in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import GridDensity, NominalPair, _kl_from_logs, kl_divergence, log_integrate_exp
from .errors import BracketError, InfeasibleParameterError, ParameterError, SolverError
from .lfd_bayes import RobustLrf
from .solvers import NewtonOptions, damped_newton, log_lambert_w0_exp, scalar_root


@dataclass
class NpSolution:
    """LFDs of a robust NP test.

    For ``variant == "II"`` the multipliers are those of the interchanged
    Type-I problem (``lambda0``/``mu0`` belong to the ball around ``f1``).
    """

    variant: str
    g0_hat: GridDensity
    g1_hat: GridDensity
    lambda0: float
    mu0: float
    lambda1: float
    mu1: float
    exponent: float
    residuals: dict
    eps0: float
    eps1: float
    iterations: int = 0

    @property
    def lrf(self) -> RobustLrf:
        return RobustLrf.from_densities(self.g0_hat, self.g1_hat)

    def multipliers(self):
        return (self.lambda0, self.mu0, self.lambda1, self.mu1)

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "eps0": self.eps0,
            "eps1": self.eps1,
            "lambda0": self.lambda0,
            "mu0": self.mu0,
            "lambda1": self.lambda1,
            "mu1": self.mu1,
            "exponent": self.exponent,
            "residuals": dict(self.residuals),
            "iterations": self.iterations,
        }


@dataclass
class DabakPair:
    g0_star: GridDensity
    g1_star: GridDensity
    s0: float
    s1: float

    @property
    def lrf(self) -> RobustLrf:
        return RobustLrf.from_densities(self.g0_star, self.g1_star)

    def summary(self) -> dict:
        return {"variant": "dabak", "s0": self.s0, "s1": self.s1}


# ---------------------------------------------------------------------------
# Type-I closed form
# ---------------------------------------------------------------------------

def type1_log_ratios(log_l, lam0, mu0, lam1, mu1):
    """``(log g0/f0, log g1/f0)`` of the Type-I LFDs for given multipliers.

    Raises :class:`InfeasibleParameterError` when the Lambert W argument is
    negative, which happens exactly when ``kappa <= 0``.
    """
    if lam1 == 0 or lam0 == -1:
        raise InfeasibleParameterError("lam1 = 0 or lam0 = -1 makes the closed form singular",
                                       {"params": (lam0, mu0, lam1, mu1)})
    kappa = lam0 / (lam1 * (1.0 + lam0))
    if not kappa > 0:
        raise InfeasibleParameterError(
            "Lambert W argument below -1/e: the closed form needs lam0/(lam1 (1+lam0)) > 0",
            {"params": (lam0, mu0, lam1, mu1), "kappa": kappa})
    k0 = 1.0 + lam0 + mu0
    b = mu1 + lam1 * (1.0 + k0) - lam1 * np.asarray(log_l, dtype=float)
    log_arg = math.log(kappa) + kappa * b - k0
    log_y = log_lambert_w0_exp(log_arg) - math.log(kappa)
    x0 = -(log_y + k0) / lam0
    x1 = x0 - log_y
    return x0, x1


class _NpProblem:
    def __init__(self, nominals: NominalPair, eps0, eps1):
        self.nom = nominals
        self.eps0, self.eps1 = float(eps0), float(eps1)
        self.lf0 = nominals.f0.log_values
        self.lf1 = nominals.f1.log_values
        self.wts = nominals.grid.weights

    def logs(self, theta):
        lam0, mu0, lam1, mu1 = math.exp(theta[0]), float(theta[1]), math.exp(theta[2]), float(theta[3])
        x0, x1 = type1_log_ratios(self.nom.log_lr, lam0, mu0, lam1, mu1)
        return (lam0, mu0, lam1, mu1), self.lf0 + x0, self.lf0 + x1

    def residual(self, theta):
        _, lg0, lg1 = self.logs(theta)
        # overflowing trial points come back non-finite and are rejected by the line search
        with np.errstate(over="ignore", invalid="ignore"):
            return np.array([self.wts @ np.exp(lg0) - 1.0,
                             self.wts @ np.exp(lg1) - 1.0,
                             _kl_from_logs(lg0, self.lf0, self.wts) - self.eps0,
                             _kl_from_logs(lg1, self.lf1, self.wts) - self.eps1])


def small_ball_np_init(nominals: NominalPair, eps0, eps1):
    """Multipliers from the quadratic expansion of KL around the nominals."""
    w = nominals.grid.weights
    f0, f1 = nominals.f0.values, nominals.f1.values
    ll = nominals.log_lr
    m0 = w @ (ll * f0)
    v0 = w @ ((ll - m0) ** 2 * f0)
    inv = np.exp(np.minimum(-ll, 300.0))
    m1 = w @ (inv * f1)
    v1 = w @ ((inv - m1) ** 2 * f1)
    lam0 = math.sqrt(max(v0, 1e-300) / (2.0 * eps0))
    lam1 = math.sqrt(max(v1, 1e-300) / (2.0 * eps1))
    return lam0, m0 - 1.0 - lam0, lam1, m1 - lam1


def _theta(mult):
    lam0, mu0, lam1, mu1 = mult
    if not (lam0 > 0 and lam1 > 0):
        raise ParameterError(f"initial multipliers need lam0, lam1 > 0, got {lam0}, {lam1}")
    return np.array([math.log(lam0), mu0, math.log(lam1), mu1])


def _newton(prob, mult, opts):
    try:
        rep = damped_newton(prob.residual, _theta(mult), opts)
    except SolverError:
        return None
    return rep if rep.converged else None


def _first_converged(prob, starts, opts):
    for m in starts:
        rep = _newton(prob, m, opts)
        if rep is not None:
            return rep
    return None


def _homotopy(nominals, eps0, eps1, default_starts, opts, steps=20):
    """Solve at a scaled radius pair, then walk geometrically to the target radii."""
    for r in (0.5, 2.0, 0.2, 5.0, 0.05, 1e-2, 1e-3):
        anchor = _NpProblem(nominals, r * eps0, r * eps1)
        rep = _first_converged(anchor, default_starts(r * eps0, r * eps1), opts)
        if rep is None:
            continue
        mult = anchor.logs(rep.root)[0]
        for s in np.geomspace(r, 1.0, steps)[1:]:
            p = _NpProblem(nominals, s * eps0, s * eps1)
            rep = _first_converged(p, [mult], opts)
            if rep is None:
                break
            mult = p.logs(rep.root)[0]
        if rep is not None:
            return rep
    return None


def _check_eps(eps0, eps1):
    for e in (eps0, eps1):
        if not (math.isfinite(e) and e > 0):
            raise ParameterError(f"NP ball radii must be finite and > 0, got {e}")


def solve_np_type1(nominals: NominalPair, eps0: float, eps1: float, init=None,
                   opts: NewtonOptions | None = None) -> NpSolution:
    """LFDs minimizing ``KL(G0, G1)`` over the two KL balls.

    Newton runs on ``(log lam0, mu0, log lam1, mu1)`` with the two
    normalizations and the two active ball constraints as residuals.  Starts
    tried in order: ``init``, the small-ball expansion, ``(1, -1, 1, -1)``,
    then a homotopy in the radii from a scaled radius pair that
    converges directly.
    """
    _check_eps(eps0, eps1)
    opts = opts or NewtonOptions()
    prob = _NpProblem(nominals, eps0, eps1)
    nominal_kl = kl_divergence(nominals.f0, nominals.f1)
    if balls_intersect(nominals, eps0, eps1):
        raise InfeasibleParameterError(
            f"the KL balls of radii ({eps0}, {eps1}) intersect: the minimal exponent is 0 and "
            "the LFDs are not unique", {"eps": (eps0, eps1)})
    default_starts = lambda e0, e1: [small_ball_np_init(nominals, e0, e1), (1.0, -1.0, 1.0, -1.0)]  # noqa: E731
    rep = _first_converged(prob, ([init] if init is not None else []) + default_starts(eps0, eps1), opts)
    if rep is None:
        rep = _homotopy(nominals, eps0, eps1, default_starts, opts)
    if rep is None:
        raise SolverError(
            f"Type-I NP LFDs did not converge for eps=({eps0}, {eps1}); "
            f"the balls may overlap (nominal KL(f0, f1) = {nominal_kl:.4g})",
            {"eps": (eps0, eps1)})
    return _np_solution(prob, rep, "I")


def _np_solution(prob, rep, variant):
    mult, lg0, lg1 = prob.logs(rep.root)
    g0 = GridDensity.on_grid(prob.nom.grid, np.exp(lg0))
    g1 = GridDensity.on_grid(prob.nom.grid, np.exp(lg1))
    s62, s62x1 = np_stationarity_residuals(g0, g1, prob.nom, mult)
    res = {
        "norm0": g0.mass() - 1.0,
        "norm1": g1.mass() - 1.0,
        "ball0": kl_divergence(g0, prob.nom.f0) - prob.eps0,
        "ball1": kl_divergence(g1, prob.nom.f1) - prob.eps1,
        "stationarity_g1": s62,
        "stationarity_g0": s62x1,
    }
    exponent = kl_divergence(g0, g1)
    if exponent < 0:
        exponent = 0.0
    return NpSolution(variant, g0, g1, *mult, exponent, res, prob.eps0, prob.eps1, rep.iterations)


def np_stationarity_residuals(g0: GridDensity, g1: GridDensity, nominals: NominalPair, mult, variant="I"):
    """Pointwise residuals of the two Type-I stationarity conditions.

    For ``variant="II"`` the multipliers belong to the interchanged problem,
    so the conditions are evaluated with the hypotheses swapped.

    First: ``log g1 - (1 + lam0 + mu0) - (1+lam0) log g0 + lam0 log f0`` (max abs).
    Second: ``g0/g1 - (mu1 + lam1 (1 + log(g1/f1)))`` relative to the
    magnitude of the terms (max abs).
    """
    if variant in ("II", "2", "type2", "TypeII"):
        g0, g1, nominals = g1, g0, nominals.swapped()
    elif variant not in ("I", "1", "type1", "TypeI"):
        raise ParameterError(f"unknown NP variant {variant!r}; expected I or II")
    lam0, mu0, lam1, mu1 = mult
    lg0, lg1 = g0.log_values, g1.log_values
    r1 = lg1 - (1.0 + lam0 + mu0) - (1.0 + lam0) * lg0 + lam0 * nominals.f0.log_values
    ratio = np.exp(lg0 - lg1)
    rhs = mu1 + lam1 * (1.0 + lg1 - nominals.f1.log_values)
    scale = np.abs(ratio) + np.abs(mu1) + np.abs(lam1) * (1.0 + np.abs(lg1 - nominals.f1.log_values))
    r2 = (ratio - rhs) / scale
    return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


def solve_np_type2(nominals: NominalPair, eps0: float, eps1: float, init=None,
                   opts: NewtonOptions | None = None) -> NpSolution:
    """LFDs minimizing ``KL(G1, G0)``: Type-I with the hypotheses interchanged."""
    _check_eps(eps0, eps1)
    sw = solve_np_type1(nominals.swapped(), eps1, eps0, init, opts)
    res = dict(sw.residuals)
    res["norm0"], res["norm1"] = sw.residuals["norm1"], sw.residuals["norm0"]
    res["ball0"], res["ball1"] = sw.residuals["ball1"], sw.residuals["ball0"]
    return NpSolution("II", sw.g1_hat, sw.g0_hat, sw.lambda0, sw.mu0, sw.lambda1, sw.mu1,
                      sw.exponent, res, eps0, eps1, sw.iterations)


def solve_np(nominals, eps0, eps1, variant="I", init=None, opts=None) -> NpSolution:
    if variant in ("I", "1", "type1", "TypeI"):
        return solve_np_type1(nominals, eps0, eps1, init, opts)
    if variant in ("II", "2", "type2", "TypeII"):
        return solve_np_type2(nominals, eps0, eps1, init, opts)
    raise ParameterError(f"unknown NP variant {variant!r}; expected I or II")


# ---------------------------------------------------------------------------
# Dabak's test
# ---------------------------------------------------------------------------

def geodesic(nominals: NominalPair, s: float) -> GridDensity:
    """``g_s`` proportional to ``f0**(1-s) f1**s``."""
    return GridDensity.from_log(nominals.grid, nominals.f0.log_values + s * nominals.log_lr, normalize=True)


def _geodesic_kl(nominals, s, ref_log):
    lg = nominals.f0.log_values + s * nominals.log_lr
    lg = lg - log_integrate_exp(lg, nominals.grid)
    return _kl_from_logs(lg, ref_log, nominals.grid.weights)


def dabak_lfds(nominals: NominalPair, eps0: float, eps1: float) -> DabakPair:
    """Points of the geodesic between the nominals at KL distance ``eps_j`` from ``f_j``.

    ``s0`` solves ``KL(g_s, f0) = eps0`` and ``s1`` solves ``KL(g_s, f1) = eps1``.
    """
    _check_eps(eps0, eps1)
    lf0, lf1 = nominals.f0.log_values, nominals.f1.log_values
    max0 = _geodesic_kl(nominals, 1.0, lf0)
    max1 = _geodesic_kl(nominals, 0.0, lf1)
    if eps0 >= max0 or eps1 >= max1:
        raise ParameterError(
            f"ball too large for the geodesic construction: eps=({eps0}, {eps1}) but the "
            f"largest reachable KL values are ({max0:.6g}, {max1:.6g})")
    try:
        s0 = scalar_root(lambda s: _geodesic_kl(nominals, s, lf0) - eps0, (0.0, 1.0))
        s1 = scalar_root(lambda s: _geodesic_kl(nominals, s, lf1) - eps1, (0.0, 1.0))
    except BracketError as exc:
        raise SolverError(f"geodesic root-find failed: {exc}") from exc
    return DabakPair(geodesic(nominals, s0), geodesic(nominals, s1), s0, s1)


def balls_intersect(nominals: NominalPair, eps0: float, eps1: float) -> bool:
    """Whether some density lies in both KL balls.

    The density of the ball around ``f0`` closest to ``f1`` (in ``KL(., f1)``)
    lies on the geodesic, so it suffices to test the geodesic point at KL
    distance ``eps0`` from ``f0``.
    """
    lf0, lf1 = nominals.f0.log_values, nominals.f1.log_values
    if eps0 >= _geodesic_kl(nominals, 1.0, lf0):
        return True
    s0 = scalar_root(lambda s: _geodesic_kl(nominals, s, lf0) - eps0, (0.0, 1.0))
    # touching balls give a zero exponent and are treated as intersecting
    return _geodesic_kl(nominals, s0, lf1) <= eps1 * (1.0 + 1e-9) + 1e-12


def thresholds(lrf: RobustLrf, g0: GridDensity, g1: GridDensity):
    """``(E_g0[log lrf], E_g1[log lrf])``: the Type-I and Type-II NP thresholds."""
    if not (lrf.grid == g0.grid == g1.grid):
        raise ParameterError("lrf and densities live on different grids")
    w = lrf.grid.weights
    t0 = float(w @ (lrf.log_values * g0.values)) / g0.mass()
    t1 = float(w @ (lrf.log_values * g1.values)) / g1.mass()
    return t0, t1


__all__ = [
    "DabakPair", "NpSolution", "balls_intersect", "dabak_lfds", "geodesic", "np_stationarity_residuals", "small_ball_np_init",
    "solve_np", "solve_np_type1", "solve_np_type2", "thresholds", "type1_log_ratios",
]
