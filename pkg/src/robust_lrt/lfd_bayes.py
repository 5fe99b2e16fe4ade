"""Least favorable densities of the asymptotically minimax robust Bayesian test.

For fixed ``u`` the inner problem maximizes ``D_u(g0, g1)`` over the two
divergence balls.  Its stationarity conditions tie each LFD to the robust
likelihood ratio ``z = g1_hat / g0_hat`` pointwise; the kernels in
:mod:`robust_lrt.kernels` solve that coupling at every grid point, and a
damped Newton iteration over the multipliers enforces the normalization and
ball constraints.  The outer problem minimizes ``D_u`` of the LFD pair over
``u`` by a scan followed by golden-section refinement.

Multipliers follow the Lagrangian
``D_u + lam_j (eps_j - D(G_j, F_j)) + mu_j (1 - integral g_j)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .density import (
    BALL_KINDS,
    GridDensity,
    NominalPair,
    _affinity_from_logs,
    _check_alpha,
    _divergence_from_logs,
    divergence,
    log_integrate_exp,
    u_affinity,
)
from .errors import InfeasibleParameterError, NumericError, ParameterError, SolverError
from .solvers import GOLDEN, NewtonOptions, damped_newton

log = logging.getLogger(__name__)

#: radii below this are solved at this value (the multipliers diverge as
#: eps -> 0); two zero radii return the nominal pair itself
EPS_MIN = 1e-12


class RobustLrf:
    """Likelihood ratio ``g1_hat / g0_hat`` tabulated on the shared grid."""

    __slots__ = ("grid", "log_values")

    def __init__(self, grid, log_values):
        log_values = np.array(log_values, dtype=float)
        if log_values.shape != (grid.n,):
            raise ParameterError(f"expected {grid.n} values, got shape {log_values.shape}")
        if not np.all(np.isfinite(log_values)):
            raise NumericError("likelihood ratio must be finite and positive")
        log_values.flags.writeable = False
        self.grid = grid
        self.log_values = log_values

    @classmethod
    def from_densities(cls, g0: GridDensity, g1: GridDensity) -> "RobustLrf":
        if g0.grid != g1.grid:
            raise ParameterError("densities live on different grids")
        return cls(g0.grid, g1.log_values - g0.log_values)

    @classmethod
    def nominal(cls, nominals: NominalPair) -> "RobustLrf":
        return cls(nominals.grid, nominals.log_lr)

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def y(self) -> np.ndarray:
        return self.grid.points

    def write_csv(self, path, header_comment=None, nominal: "RobustLrf | None" = None):
        """``y,value`` rows (plus ``nominal`` when given), 17 significant digits."""
        with open(path, "w") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write("y,value\n" if nominal is None else "y,value,nominal\n")
            vals = self.values
            nom = None if nominal is None else nominal.values
            for i, y in enumerate(self.y):
                row = f"{y:.17g},{vals[i]:.17g}"
                if nom is not None:
                    row += f",{nom[i]:.17g}"
                fh.write(row + "\n")


@dataclass
class LfdSolution:
    kind: str
    alpha: float | None
    eps0: float
    eps1: float
    u: float
    g0_hat: GridDensity
    g1_hat: GridDensity
    lambda0: float
    mu0: float
    lambda1: float
    mu1: float
    lrf: RobustLrf
    d_u: float
    residuals: dict
    iterations: int = 0

    def multipliers(self):
        return (self.lambda0, self.mu0, self.lambda1, self.mu1)

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "eps0": self.eps0,
            "eps1": self.eps1,
            "u": self.u,
            # infinite multipliers (zero radii) are written as null
            "lambda0": self.lambda0 if math.isfinite(self.lambda0) else None,
            "mu0": self.mu0,
            "lambda1": self.lambda1 if math.isfinite(self.lambda1) else None,
            "mu1": self.mu1,
            "d_u": self.d_u,
            "residuals": dict(self.residuals),
            "iterations": self.iterations,
        }


@dataclass
class UScan:
    """``D_u`` of the LFD pair and the multipliers along a ``u`` grid."""

    u: np.ndarray
    d_u: np.ndarray
    lambda0: np.ndarray
    mu0: np.ndarray
    lambda1: np.ndarray
    mu1: np.ndarray
    solutions: list = field(repr=False)
    failures: list = field(default_factory=list)

    def converged(self) -> np.ndarray:
        return np.isfinite(self.d_u)

    def write_csv(self, path, header_comment=None):
        with open(path, "w") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write("u,d_u,lambda0,mu0,lambda1,mu1\n")
            for row in zip(self.u, self.d_u, self.lambda0, self.mu0, self.lambda1, self.mu1):
                fh.write(",".join("nan" if not math.isfinite(v) else f"{v:.17g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def _check_ball(kind, alpha, eps0, eps1, u=None):
    if kind not in BALL_KINDS:
        raise ParameterError(f"unknown ball kind {kind!r}; expected one of {BALL_KINDS}")
    if kind != "kl":
        if alpha is None:
            raise ParameterError(f"{kind} ball needs alpha")
        _check_alpha(alpha)
    for e in (eps0, eps1):
        if not (math.isfinite(e) and e >= 0):
            raise ParameterError(f"ball radius must be finite and >= 0, got {e}")
    if u is not None and not 0.0 < u < 1.0:
        raise ParameterError(f"u must lie in (0, 1), got {u}")


def _log_terms(nominals: NominalPair):
    return nominals.f0.log_values, nominals.f1.log_values, nominals.grid.weights


def small_ball_init(nominals: NominalPair, kind, u, eps0, eps1):
    """Multipliers from the second-order expansion of the divergence.

    For a small radius ``g_j = f_j (1 + delta_j)`` and every divergence used
    here behaves like ``integral f delta**2 / 2``, which fixes ``lam_j`` from
    the spread of ``(1-u) l**u`` under ``f0`` (and of ``u l**(u-1)`` under
    ``f1``).  Returns ``(lam0, mu0, lam1, mu1)`` in the convention of the
    requested family.
    """
    lf0, lf1, wts = _log_terms(nominals)
    ll = nominals.log_lr
    a0 = (1.0 - u) * np.exp(np.minimum(u * ll, 300.0))
    a1 = u * np.exp(np.minimum((u - 1.0) * ll, 300.0))
    f0, f1 = nominals.f0.values, nominals.f1.values
    m0, m1 = wts @ (a0 * f0), wts @ (a1 * f1)
    v0 = max(wts @ ((a0 - m0) ** 2 * f0), 1e-300)
    v1 = max(wts @ ((a1 - m1) ** 2 * f1), 1e-300)
    lam0 = math.sqrt(v0 / (2.0 * max(eps0, EPS_MIN)))
    lam1 = math.sqrt(v1 / (2.0 * max(eps1, EPS_MIN)))
    if kind == "kl":
        return lam0, m0 - lam0, lam1, m1 - lam1
    return lam0, float(m0), lam1, float(m1)


# ---------------------------------------------------------------------------
# inner problem at fixed u
# ---------------------------------------------------------------------------

class _Inner:
    """Residual maps for one ``(nominals, ball, u)`` problem."""

    def __init__(self, nominals, kind, alpha, u, eps0, eps1):
        self.nominals = nominals
        self.kind = kind
        self.alpha = alpha
        self.fam = kernels.FAMILY_CODES[kind]
        self.kalpha = 0.5 if alpha is None else float(alpha)
        self.u = float(u)
        self.eps0 = max(float(eps0), EPS_MIN)
        self.eps1 = max(float(eps1), EPS_MIN)
        self.lf0, self.lf1, self.wts = _log_terms(nominals)
        self.grid = nominals.grid
        self.log_l = nominals.log_lr
        self._w = None
        self.evaluations = 0

    def pointwise(self, lam0, mu0, lam1, mu1):
        w, t0, t1 = kernels.solve_lrf(self.log_l, self.fam, self.kalpha, self.u,
                                      lam0, mu0, lam1, mu1, self._w)
        self.evaluations += 1
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(t0)) and np.all(np.isfinite(t1))):
            raise NumericError("pointwise coupling produced non-finite values")
        self._w = w
        return w, t0, t1

    def div(self, log_g, log_f):
        return _divergence_from_logs(self.kind, log_g, log_f, self.alpha, self.wts)

    # KL: unknowns (log lam0, log lam1, c) with c = mu0/lam0 - mu1/lam1; the
    # normalizations are explicit, so only two ball equations and the
    # consistency of c with the normalizing constants remain.
    def kl_state(self, theta):
        lam0, lam1, c = math.exp(theta[0]), math.exp(theta[1]), float(theta[2])
        w, t0, t1 = self.pointwise(lam0, 0.0, lam1, -c * lam1)
        lm0 = log_integrate_exp(self.lf0 + t0, self.grid)
        lm1 = log_integrate_exp(self.lf1 + t1, self.grid)
        return lam0, lam1, c, w, t0 - lm0, t1 - lm1, lm0, lm1

    def kl_residual(self, theta):
        _, _, _, _, t0, t1, lm0, lm1 = self.kl_state(theta)
        return np.array([self.div(self.lf0 + t0, self.lf0) - self.eps0,
                         self.div(self.lf1 + t1, self.lf1) - self.eps1,
                         lm1 - lm0])

    # alpha / symmetric alpha: unknowns (log lam0, mu0, log lam1, mu1)
    def gen_state(self, theta):
        lam0, mu0, lam1, mu1 = math.exp(theta[0]), float(theta[1]), math.exp(theta[2]), float(theta[3])
        w, t0, t1 = self.pointwise(lam0, mu0, lam1, mu1)
        return lam0, mu0, lam1, mu1, w, t0, t1

    def gen_residual(self, theta):
        *_, t0, t1 = self.gen_state(theta)
        lg0, lg1 = self.lf0 + t0, self.lf1 + t1
        return np.array([self.wts @ np.exp(lg0) - 1.0,
                         self.wts @ np.exp(lg1) - 1.0,
                         self.div(lg0, self.lf0) - self.eps0,
                         self.div(lg1, self.lf1) - self.eps1])

    # conversions between multipliers and Newton unknowns
    def theta_from(self, mult):
        lam0, mu0, lam1, mu1 = mult
        if not (lam0 > 0 and lam1 > 0):
            raise ParameterError(f"initial multipliers need lam0, lam1 > 0, got {lam0}, {lam1}")
        if self.kind == "kl":
            return np.array([math.log(lam0), math.log(lam1), mu0 / lam0 - mu1 / lam1])
        return np.array([math.log(lam0), mu0, math.log(lam1), mu1])

    def residual(self, theta):
        return self.kl_residual(theta) if self.kind == "kl" else self.gen_residual(theta)

    def newton(self, theta0, opts):
        self._w = None
        return damped_newton(self.residual, theta0, opts)

    def build(self, theta, iterations) -> LfdSolution:
        u = self.u
        if self.kind == "kl":
            lam0, lam1, c, w, t0, t1, lm0, lm1 = self.kl_state(theta)
            mu0, mu1 = lam0 * lm0, lam1 * (lm1 - c)
        else:
            lam0, mu0, lam1, mu1, w, t0, t1 = self.gen_state(theta)
        lg0, lg1 = self.lf0 + t0, self.lf1 + t1
        g0 = GridDensity.on_grid(self.grid, np.exp(lg0))
        g1 = GridDensity.on_grid(self.grid, np.exp(lg1))
        lrf = RobustLrf(self.grid, w)
        res = {
            "norm0": g0.mass() - 1.0,
            "norm1": g1.mass() - 1.0,
            "ball0": self.div(lg0, self.lf0) - self.eps0,
            "ball1": self.div(lg1, self.lf1) - self.eps1,
            "coupling": coupling_residual(self.kind, self.alpha, u, (lam0, mu0, lam1, mu1), w,
                                          g0.log_values - self.lf0, g1.log_values - self.lf1),
            "ratio": float(np.max(np.abs(w - (g1.log_values - g0.log_values)))),
        }
        edge = boundary_mask(self.kind, self.alpha, u, (lam0, mu0, lam1, mu1), w)
        res["boundary_points"] = int(edge.sum())
        res["boundary_mass"] = float(max(self.wts[edge] @ g0.values[edge], self.wts[edge] @ g1.values[edge]))
        d_u = _affinity_from_logs(lg0, lg1, u, self.wts)
        return LfdSolution(self.kind, self.alpha, self.eps0, self.eps1, u, g0, g1,
                           lam0, mu0, lam1, mu1, lrf, d_u, res, iterations)


#: relative distance to the lower end of the generator range below which a
#: point counts as having an active non-negativity constraint
BOUNDARY_TOL = 1e-8


def boundary_mask(kind, alpha, u, mult, log_z) -> np.ndarray:
    """Grid points where the non-negativity constraint of an LFD is active.

    Only the alpha family with ``alpha > 1`` has a generator derivative that
    is bounded below, so only there can a stationarity equation push
    ``g_j / f_j`` to zero.  The count is a diagnostic; such points still
    enter :func:`coupling_residual`.
    """
    if kind != "alpha" or alpha < 1.0:
        return np.zeros(np.shape(log_z), dtype=bool)
    lam0, mu0, lam1, mu1 = mult
    v0 = ((1.0 - u) * np.exp(u * log_z) - mu0) / lam0
    v1 = (u * np.exp((u - 1.0) * log_z) - mu1) / lam1
    # psi > 1/(1 - alpha); 1 - (1 - alpha) v is the relative distance to that bound
    return (1.0 - (1.0 - alpha) * v0 <= BOUNDARY_TOL) | (1.0 - (1.0 - alpha) * v1 <= BOUNDARY_TOL)


def coupling_residual(kind, alpha, u, mult, log_z, t0, t1) -> float:
    """Relative residual of the pointwise stationarity conditions.

    With ``t_j = log(g_j/f_j)`` and ``z = g1/g0`` the conditions are
    ``lam0 psi(t0) + mu0 = (1-u) z**u`` and ``lam1 psi(t1) + mu1 = u z**(u-1)``.
    Each difference is divided by ``max(1, |terms|)``.  Measuring in
    generator space keeps the check well scaled where ``psi`` is flat, for
    example where ``g_j/f_j`` tends to zero or to infinity.
    """
    lam0, mu0, lam1, mu1 = mult
    code = kernels.FAMILY_CODES[kind]
    a = 0.0 if alpha is None else alpha
    rhs0 = (1.0 - u) * np.exp(u * log_z)
    rhs1 = u * np.exp((u - 1.0) * log_z)
    lhs0 = lam0 * kernels.psi(t0, code, a) + mu0
    lhs1 = lam1 * kernels.psi(t1, code, a) + mu1
    r0 = np.abs(lhs0 - rhs0) / np.maximum(1.0, np.maximum(np.abs(rhs0), np.abs(lhs0 - mu0) + abs(mu0)))
    r1 = np.abs(lhs1 - rhs1) / np.maximum(1.0, np.maximum(np.abs(rhs1), np.abs(lhs1 - mu1) + abs(mu1)))
    return float(max(r0.max(), r1.max()))


def sym_alpha_residuals(sol: LfdSolution, nominals: NominalPair):
    """Scaled residuals of the two polynomial-type stationarity equations in ``x_j = g_j/f_j``.

    Each equation is divided by ``lam_j x_j**alpha`` so that the result is an
    absolute error in the units of the generator derivative.
    """
    a, u = sol.alpha, sol.u
    z = sol.lrf.log_values
    lx0 = sol.g0_hat.log_values - nominals.f0.log_values
    lx1 = sol.g1_hat.log_values - nominals.f1.log_values
    out = []
    for lam, mu, lx, coef in ((sol.lambda0, sol.mu0, lx0, (1.0 - u) * np.exp(u * z)),
                              (sol.lambda1, sol.mu1, lx1, u * np.exp((u - 1.0) * z))):
        r = (np.exp((a - 1.0) * lx) / (1.0 - a)
             + (coef - lam / (a * (1.0 - a)) - mu) / lam
             + np.exp(-a * lx) / a)
        out.append(float(np.max(np.abs(r))))
    return tuple(out)


def _nominal_solution(nominals, kind, alpha, u) -> LfdSolution:
    """Degenerate balls: the LFDs are the nominals and the multipliers are infinite."""
    f0, f1 = nominals.f0, nominals.f1
    d_u = _affinity_from_logs(f0.log_values, f1.log_values, u, nominals.grid.weights)
    res = {"norm0": f0.mass() - 1.0, "norm1": f1.mass() - 1.0, "ball0": 0.0, "ball1": 0.0,
           "coupling": 0.0, "ratio": 0.0, "boundary_points": 0, "boundary_mass": 0.0}
    return LfdSolution(kind, alpha, 0.0, 0.0, u, f0, f1, math.inf, 0.0, math.inf, 0.0,
                       RobustLrf.nominal(nominals), d_u, res, 0)


def _solve(nominals, kind, alpha, u, eps0, eps1, init, opts) -> LfdSolution:
    _check_ball(kind, alpha, eps0, eps1, u)
    if eps0 == 0.0 and eps1 == 0.0:
        return _nominal_solution(nominals, kind, alpha, u)
    if init is not None and not all(map(math.isfinite, init)):
        init = None
    opts = opts or NewtonOptions()
    prob = _Inner(nominals, kind, alpha, u, eps0, eps1)
    starts = []
    if init is not None:
        starts.append(("warm start", prob.theta_from(init)))
    starts.append(("small-ball start", prob.theta_from(small_ball_init(nominals, kind, u, prob.eps0, prob.eps1))))
    last = None
    for label, theta0 in starts:
        try:
            rep = prob.newton(theta0, opts)
        except SolverError as exc:
            log.debug("%s failed: %s", label, exc)
            last = exc
            continue
        if rep.converged:
            return prob.build(rep.root, rep.iterations)
        last = SolverError(f"{kind} LFD at u={u}: Newton stalled (|r|={rep.residual_norm:.3g})",
                           {"x": rep.root, "residual": rep.residual})
    # continuation in the radius from a near-nominal problem
    sol = _continuation(nominals, kind, alpha, u, prob.eps0, prob.eps1, opts)
    if sol is not None:
        return sol
    if isinstance(last, InfeasibleParameterError):
        raise last
    raise SolverError(f"{kind} LFD did not converge at u={u} (eps=({eps0}, {eps1}))",
                      getattr(last, "diagnostics", {}))


def _continuation(nominals, kind, alpha, u, eps0, eps1, opts, steps=12):
    init = None
    for s in np.geomspace(1e-3, 1.0, steps):
        e0, e1 = s * eps0, s * eps1
        prob = _Inner(nominals, kind, alpha, u, e0, e1)
        if init is None:
            init = small_ball_init(nominals, kind, u, prob.eps0, prob.eps1)
        try:
            rep = prob.newton(prob.theta_from(init), opts)
        except SolverError:
            return None
        if not rep.converged:
            return None
        sol = prob.build(rep.root, rep.iterations)
        init = sol.multipliers()
    log.info("%s LFD at u=%s solved by continuation in the radius", kind, u)
    return sol


def solve_kl_lfd(nominals: NominalPair, eps0: float, eps1: float, u: float, init=None,
                 opts: NewtonOptions | None = None) -> LfdSolution:
    """LFDs for KL balls at fixed ``u``.

    ``init`` is an optional ``(lam0, mu0, lam1, mu1)`` tuple (for example the
    multipliers of a neighbouring ``u``).  Newton runs on
    ``(log lam0, log lam1, mu0/lam0 - mu1/lam1)``, so the returned ``lam_j``
    are always positive.
    """
    return _solve(nominals, "kl", None, u, eps0, eps1, init, opts)


def solve_alpha_lfd(nominals: NominalPair, eps0: float, eps1: float, alpha: float, u: float, init=None,
                    opts: NewtonOptions | None = None) -> LfdSolution:
    """LFDs for alpha-divergence balls at fixed ``u``.

    Newton runs on ``(log lam0, mu0, log lam1, mu1)``.  Multipliers for which
    a power base ``1 + (1-alpha)(mu - .)/lam`` is non-positive for every ``z``
    raise :class:`InfeasibleParameterError`; during the iteration such trial
    points are rejected by the line search.
    """
    return _solve(nominals, "alpha", alpha, u, eps0, eps1, init, opts)


def solve_symalpha_lfd(nominals: NominalPair, eps0: float, eps1: float, alpha: float, u: float, init=None,
                       opts: NewtonOptions | None = None) -> LfdSolution:
    """LFDs for symmetrized alpha-divergence balls at fixed ``u``.

    The pointwise equations are solved in ``t = log(g/f)``; the generator
    derivative is strictly increasing in ``t`` for every alpha, so each grid
    point has exactly one admissible positive root.
    """
    return _solve(nominals, "symalpha", alpha, u, eps0, eps1, init, opts)


def solve_lfd(nominals, kind, eps0, eps1, u, alpha=None, init=None, opts=None) -> LfdSolution:
    """Dispatch on ``kind``."""
    if kind == "kl":
        return solve_kl_lfd(nominals, eps0, eps1, u, init, opts)
    if kind == "alpha":
        return solve_alpha_lfd(nominals, eps0, eps1, alpha, u, init, opts)
    if kind == "symalpha":
        return solve_symalpha_lfd(nominals, eps0, eps1, alpha, u, init, opts)
    raise ParameterError(f"unknown ball kind {kind!r}; expected one of {BALL_KINDS}")


# ---------------------------------------------------------------------------
# outer problem over u
# ---------------------------------------------------------------------------

def u_scan(nominals: NominalPair, kind: str, eps0: float, eps1: float, alpha=None,
           u_range=(0.02, 0.98), scan_points: int = 49, opts=None) -> UScan:
    """Solve the inner problem on an equally spaced ``u`` grid.

    Continuation starts from the grid point nearest the middle of the range
    and walks outwards in both directions, warm-starting each solve from its
    neighbour.  Failed points are recorded as gaps (``nan``).
    """
    _check_ball(kind, alpha, eps0, eps1)
    a, b = map(float, u_range)
    if not 0.0 < a < b < 1.0:
        raise ParameterError(f"u range must satisfy 0 < a < b < 1, got {u_range}")
    if scan_points < 8:
        raise ParameterError("scan_points must be >= 8")
    us = np.linspace(a, b, int(scan_points))
    sols = [None] * us.size
    failures = []
    mid = int(np.argmin(np.abs(us - 0.5 * (a + b))))
    for order in (range(mid, us.size), range(mid - 1, -1, -1)):
        init = sols[mid].multipliers() if sols[mid] is not None and order.start != mid else None
        for i in order:
            try:
                sols[i] = solve_lfd(nominals, kind, eps0, eps1, float(us[i]), alpha, init, opts)
                init = sols[i].multipliers()
            except SolverError as exc:
                failures.append((float(us[i]), str(exc)))
                log.warning("u-scan gap at u=%.4f: %s", us[i], exc)
    nan = float("nan")
    col = lambda f: np.array([f(s) if s is not None else nan for s in sols])  # noqa: E731
    return UScan(us, col(lambda s: s.d_u), col(lambda s: s.lambda0), col(lambda s: s.mu0),
                 col(lambda s: s.lambda1), col(lambda s: s.mu1), sols, failures)


def minimize_over_u(nominals: NominalPair, kind: str, eps0: float, eps1: float, alpha=None,
                    u_range=(0.02, 0.98), scan_points: int = 49, tol: float = 1e-5, opts=None,
                    return_scan: bool = False):
    """LFD pair at the minimizing ``u`` of ``D_u(g0_hat(u), g1_hat(u))``.

    The curve need not be convex in ``u``, so the global search runs over the
    scan; golden-section refinement then works inside the two cells around
    the best scan point.  More than 30% failed scan points aborts.
    """
    scan = u_scan(nominals, kind, eps0, eps1, alpha, u_range, scan_points, opts)
    ok = scan.converged()
    if ok.sum() < 0.7 * ok.size:
        raise SolverError(f"u-scan failed at {ok.size - ok.sum()} of {ok.size} points",
                          {"failures": scan.failures})
    k = int(np.nanargmin(scan.d_u))
    best = scan.solutions[k]
    lo = scan.u[k - 1] if k > 0 and ok[k - 1] else scan.u[k]
    hi = scan.u[k + 1] if k + 1 < ok.size and ok[k + 1] else scan.u[k]
    cache = {}

    def phi(u):
        try:
            s = solve_lfd(nominals, kind, eps0, eps1, float(u), alpha, best.multipliers(), opts)
        except SolverError:
            return math.inf
        cache[float(u)] = s
        return s.d_u

    if hi > lo:
        c = hi - GOLDEN * (hi - lo)
        d = lo + GOLDEN * (hi - lo)
        fc, fd = phi(c), phi(d)
        while hi - lo > tol:
            if fc <= fd:
                hi, d, fd = d, c, fc
                c = hi - GOLDEN * (hi - lo)
                fc = phi(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + GOLDEN * (hi - lo)
                fd = phi(d)
        for s in cache.values():
            if s.d_u < best.d_u:
                best = s
    return (best, scan) if return_scan else best


# ---------------------------------------------------------------------------
# saddle-point check
# ---------------------------------------------------------------------------

@dataclass
class SaddleReport:
    u_hat: float
    d_hat: float
    u_grid: np.ndarray
    d_grid: np.ndarray
    curve_min_ok: bool
    trials: int
    max_excess: float
    violations: list

    @property
    def ok(self) -> bool:
        return self.curve_min_ok and not self.violations


def _random_direction(rng, y):
    """Bounded random function on the grid: a few random cosines squashed by tanh."""
    span = y[-1] - y[0]
    b = np.zeros_like(y)
    for _ in range(int(rng.integers(1, 5))):
        freq = rng.uniform(0.05, 3.0) * 2 * np.pi / span * rng.integers(1, 8)
        b += rng.normal() * np.cos(freq * y + rng.uniform(0, 2 * np.pi))
    b += rng.normal() * np.tanh(y / rng.uniform(0.5, 4.0))
    return b / max(np.max(np.abs(b)), 1e-12)


def _feasible_perturbation(g_hat: GridDensity, f: GridDensity, kind, alpha, eps, rng):
    """Random density inside the ball around ``f``.

    ``g_hat`` is tilted by ``exp(s b)`` and then mixed with ``f``; the mixing
    weight is bisected so the divergence lands at or below ``eps``
    (divergences are convex, so the mix with ``f`` is always feasible).
    """
    grid = g_hat.grid
    b = _random_direction(rng, grid.points)
    s = float(np.exp(rng.uniform(np.log(1e-3), np.log(2.0)))) * rng.choice([-1.0, 1.0])
    tilted = GridDensity.from_log(grid, g_hat.log_values + s * b, normalize=True)
    target = eps * (1.0 - rng.uniform(0.0, 0.2) ** 2)

    def mix(w):
        return GridDensity.on_grid(grid, (1.0 - w) * tilted.values + w * f.values)

    if divergence(tilted, f, kind, alpha) <= target:
        return tilted
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if divergence(mix(mid), f, kind, alpha) <= target:
            hi = mid
        else:
            lo = mid
    return mix(hi)


def verify_saddle(sol: LfdSolution, nominals: NominalPair, trials: int = 200, seed: int = 0,
                  u_grid=None, tol: float = 1e-6) -> SaddleReport:
    """Check both inequalities of the saddle condition for a minimizing solution.

    Right: ``D_u(g0_hat, g1_hat)`` over ``u_grid`` is never below its value
    at ``sol.u`` (by more than 1e-8).  Left: ``trials`` random feasible pairs
    ``(G0, G1)`` satisfy ``D_u(G0, G1) <= D_u(g0_hat, g1_hat) + tol`` at
    ``u = sol.u``.  A violation records the trial index, its seed and the excess.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    u_hat = sol.u
    d_hat = u_affinity(sol.g0_hat, sol.g1_hat, u_hat)
    if u_grid is None:
        u_grid = np.unique(np.concatenate([np.linspace(0.01, 0.99, 99), [u_hat - 0.1, u_hat + 0.1]]))
        u_grid = u_grid[(u_grid > 0) & (u_grid < 1)]
    u_grid = np.asarray(u_grid, dtype=float)
    d_grid = np.array([u_affinity(sol.g0_hat, sol.g1_hat, float(v)) for v in u_grid])
    curve_ok = bool(np.all(d_grid >= d_hat - 1e-8))
    violations = []
    max_excess = -math.inf
    seeds = np.random.SeedSequence(seed).spawn(trials)
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        g0 = _feasible_perturbation(sol.g0_hat, nominals.f0, sol.kind, sol.alpha, sol.eps0, rng)
        g1 = _feasible_perturbation(sol.g1_hat, nominals.f1, sol.kind, sol.alpha, sol.eps1, rng)
        excess = u_affinity(g0, g1, u_hat) - d_hat
        max_excess = max(max_excess, excess)
        if excess > tol:
            violations.append({"trial": i, "seed": (seed, i), "excess": excess})
    return SaddleReport(u_hat, d_hat, u_grid, d_grid, curve_ok, trials, max_excess, violations)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_solution(sol: LfdSolution, out_dir, stem="lfd", header_comment=None, nominals=None, extra=None) -> Path:
    """Write ``<stem>_g0.csv``, ``<stem>_g1.csv``, ``<stem>_lrf.csv`` and ``<stem>.json``.

    The JSON document holds the scalars and file references.  Returns the
    JSON path.
    """
    from .density import write_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"g0_hat": f"{stem}_g0.csv", "g1_hat": f"{stem}_g1.csv", "lrf": f"{stem}_lrf.csv"}
    write_csv(sol.g0_hat, out / files["g0_hat"], header_comment)
    write_csv(sol.g1_hat, out / files["g1_hat"], header_comment)
    nominal_lrf = RobustLrf.nominal(nominals) if nominals is not None else None
    sol.lrf.write_csv(out / files["lrf"], header_comment, nominal_lrf)
    doc = sol.summary()
    doc["files"] = files
    if header_comment:
        doc["header"] = header_comment
    if extra:
        doc.update(extra)
    path = out / f"{stem}.json"
    path.write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


__all__ = [
    "BOUNDARY_TOL", "EPS_MIN", "LfdSolution", "RobustLrf", "SaddleReport", "UScan", "boundary_mask", "coupling_residual",
    "minimize_over_u", "save_solution", "small_ball_init", "solve_alpha_lfd", "solve_kl_lfd",
    "solve_lfd", "solve_symalpha_lfd", "sym_alpha_residuals", "u_scan", "verify_saddle",
]
