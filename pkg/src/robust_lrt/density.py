"""Densities tabulated on a uniform grid, quadrature and divergence functionals.

Every density in a scenario lives on one shared uniform grid over a truncated
support.  Integrals use the composite trapezoid rule.  Values are floored at
``FLOOR`` before logs or ratios are taken, so ``0 * log 0`` contributes 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import DomainError, NumericError, ParameterError

FLOOR = 1e-300
DEFAULT_GRID = (-12.0, 12.0, 4801)


@dataclass(frozen=True)
class Grid:
    """Uniform grid with inclusive endpoints."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ParameterError("grid bounds must be finite")
        if not self.lo < self.hi:
            raise ParameterError(f"grid needs lo < hi, got ({self.lo}, {self.hi})")
        if int(self.n) != self.n or self.n < 3:
            raise ParameterError(f"grid needs n >= 3 points, got {self.n}")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "n", int(self.n))

    @cached_property
    def points(self) -> np.ndarray:
        y = np.linspace(self.lo, self.hi, self.n)
        y.flags.writeable = False
        return y

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights: ``integrate(v) == weights @ v``."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.flags.writeable = False
        return w

    @cached_property
    def log_weights(self) -> np.ndarray:
        lw = np.log(self.weights)
        lw.flags.writeable = False
        return lw

    @classmethod
    def coerce(cls, grid) -> "Grid":
        if isinstance(grid, Grid):
            return grid
        lo, hi, n = grid
        return cls(lo, hi, n)


class GridDensity:
    """Non-negative density values on a uniform grid.

    Instances are immutable.  ``normalize=True`` rescales the values so that
    the trapezoid integral is one.
    """

    __slots__ = ("grid", "values", "_log")

    def __init__(self, lo, hi, values, normalize=False):
        values = np.array(values, dtype=float)
        if values.ndim != 1:
            raise ParameterError("density values must be one-dimensional")
        grid = Grid(lo, hi, values.size)
        if not np.all(np.isfinite(values)):
            raise NumericError("density values must be finite")
        if np.any(values < 0):
            raise ParameterError("density values must be non-negative")
        if not np.any(values > 0):
            raise ParameterError("density must be positive somewhere")
        if normalize:
            values = values / (grid.weights @ values)
        values.flags.writeable = False
        self.grid = grid
        self.values = values
        self._log = None

    @classmethod
    def on_grid(cls, grid, values, normalize=False) -> "GridDensity":
        grid = Grid.coerce(grid)
        return cls(grid.lo, grid.hi, values, normalize=normalize)

    @classmethod
    def from_log(cls, grid, log_values, normalize=False) -> "GridDensity":
        """Build from log-values; ``normalize`` shifts by the log-integral."""
        grid = Grid.coerce(grid)
        log_values = np.asarray(log_values, dtype=float)
        if normalize:
            log_values = log_values - log_integrate_exp(log_values, grid)
        return cls(grid.lo, grid.hi, np.exp(log_values))

    @property
    def lo(self) -> float:
        return self.grid.lo

    @property
    def hi(self) -> float:
        return self.grid.hi

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def y(self) -> np.ndarray:
        return self.grid.points

    @property
    def log_values(self) -> np.ndarray:
        """``log(max(values, FLOOR))``."""
        if self._log is None:
            lv = np.log(np.maximum(self.values, FLOOR))
            lv.flags.writeable = False
            self._log = lv
        return self._log

    def mass(self) -> float:
        return float(self.grid.weights @ self.values)

    def mean(self) -> float:
        return float(self.grid.weights @ (self.y * self.values)) / self.mass()

    def variance(self) -> float:
        m = self.mean()
        return float(self.grid.weights @ ((self.y - m) ** 2 * self.values)) / self.mass()

    def reflected(self) -> "GridDensity":
        """Density of ``-Y``; requires a grid symmetric about zero."""
        if not math.isclose(self.lo, -self.hi):
            raise ParameterError("reflection needs a grid symmetric about 0")
        return GridDensity(self.lo, self.hi, self.values[::-1])

    def __repr__(self):
        return f"GridDensity(lo={self.lo}, hi={self.hi}, n={self.n})"


def same_grid(*densities: GridDensity) -> Grid:
    """Return the shared grid or raise ``ParameterError``."""
    grid = densities[0].grid
    for d in densities[1:]:
        if d.grid != grid:
            raise ParameterError(f"densities live on different grids: {grid} vs {d.grid}")
    return grid


# ---------------------------------------------------------------------------
# Nominal families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    mean: float
    var: float

    def pdf(self, y):
        if not self.var > 0:
            raise ParameterError(f"Gaussian variance must be > 0, got {self.var}")
        return np.exp(-0.5 * (y - self.mean) ** 2 / self.var) / math.sqrt(2 * math.pi * self.var)


@dataclass(frozen=True)
class Laplace:
    loc: float = 0.0
    scale: float = 1.0

    def pdf(self, y):
        if not self.scale > 0:
            raise ParameterError(f"Laplace scale must be > 0, got {self.scale}")
        return np.exp(-np.abs(y - self.loc) / self.scale) / (2 * self.scale)


@dataclass(frozen=True)
class LaplaceSine:
    """Standard Laplace density modulated by ``sin(2 pi y) + 1``."""

    def pdf(self, y):
        return Laplace().pdf(y) * (np.sin(2 * np.pi * y) + 1.0)


Family = Union[Gaussian, Laplace, LaplaceSine]


def make_nominal(family: Family, grid=DEFAULT_GRID, normalize=True) -> GridDensity:
    """Tabulate ``family`` on ``grid``.

    Values are floored at ``FLOOR`` so that every nominal has full support on
    the grid, then (by default) rescaled to unit trapezoid mass.
    """
    grid = Grid.coerce(grid)
    if not hasattr(family, "pdf"):
        raise ParameterError(f"unknown nominal family {family!r}")
    values = np.maximum(family.pdf(grid.points), FLOOR)
    return GridDensity.on_grid(grid, values, normalize=normalize)


@dataclass(frozen=True)
class NominalPair:
    f0: GridDensity
    f1: GridDensity
    label: str = ""

    def __post_init__(self):
        same_grid(self.f0, self.f1)

    @property
    def grid(self) -> Grid:
        return self.f0.grid

    @cached_property
    def log_lr(self) -> np.ndarray:
        """Nominal log-likelihood ratio ``log f1 - log f0``."""
        return self.f1.log_values - self.f0.log_values

    def swapped(self) -> "NominalPair":
        return NominalPair(self.f1, self.f0, self.label + "-swapped" if self.label else "")


NOMINAL_TABLE = {
    "d1": (Gaussian(-1.0, 1.0), Gaussian(1.0, 1.0)),
    "d2": (Gaussian(-1.0, 1.0), Gaussian(1.0, 4.0)),
    "d3": (Laplace(0.0, 1.0), LaplaceSine()),
}


def nominal_pair(label: str, grid=DEFAULT_GRID) -> NominalPair:
    """One of the tabulated scenarios ``d1``, ``d2``, ``d3``."""
    try:
        fam0, fam1 = NOMINAL_TABLE[label]
    except KeyError:
        raise ParameterError(f"unknown nominal pair {label!r}; expected one of {sorted(NOMINAL_TABLE)}")
    return NominalPair(make_nominal(fam0, grid), make_nominal(fam1, grid), label)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def integrate(values, grid) -> float:
    """Composite trapezoid integral of ``values`` tabulated on ``grid``."""
    grid = Grid.coerce(grid)
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ParameterError(f"expected {grid.n} values, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise NumericError("cannot integrate non-finite values")
    return float(grid.weights @ values)


def log_integrate_exp(log_values, grid) -> float:
    """``log integral exp(log_values)`` with max-shifting."""
    grid = Grid.coerce(grid)
    a = np.asarray(log_values, dtype=float) + grid.log_weights
    m = np.max(a)
    if not np.isfinite(m):
        raise NumericError("log-integrand has no finite maximum")
    return float(m + np.log(np.sum(np.exp(a - m))))


# ---------------------------------------------------------------------------
# Affinity and divergences
# ---------------------------------------------------------------------------

def _affinity_from_logs(log_g0, log_g1, u, weights) -> float:
    return float(weights @ np.exp(u * log_g1 + (1.0 - u) * log_g0))


def u_affinity(g0: GridDensity, g1: GridDensity, u: float) -> float:
    """``D_u(g0, g1) = integral g1**u * g0**(1-u)``."""
    grid = same_grid(g0, g1)
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u-affinity needs u in [0, 1], got {u}")
    if u == 0.0:
        return g0.mass()
    if u == 1.0:
        return g1.mass()
    return _affinity_from_logs(g0.log_values, g1.log_values, u, grid.weights)


def _check_support(g: GridDensity, f: GridDensity):
    if np.any((g.values > 0) & (f.values == 0)):
        raise DomainError("g puts mass where the reference density f vanishes")


def _kl_from_logs(log_g, log_f, weights) -> float:
    g = np.exp(log_g)
    return float(weights @ (g * (log_g - log_f)))


def kl_divergence(g: GridDensity, f: GridDensity) -> float:
    """``integral g log(g/f)``."""
    grid = same_grid(g, f)
    _check_support(g, f)
    lg = g.log_values
    terms = np.where(g.values > 0, g.values * (lg - f.log_values), 0.0)
    return float(grid.weights @ terms)


def _check_alpha(alpha):
    if alpha in (0.0, 1.0) or not math.isfinite(alpha):
        raise DomainError(f"alpha must be finite and not in {{0, 1}}, got {alpha}")


def _alpha_from_logs(log_g, log_f, alpha, weights) -> float:
    g, f = np.exp(log_g), np.exp(log_f)
    # trial points of an iteration may overflow; the caller sees inf and rejects them
    with np.errstate(over="ignore"):
        cross = np.exp(alpha * log_g + (1.0 - alpha) * log_f)
    return float(weights @ ((1.0 - alpha) * f + alpha * g - cross)) / (alpha * (1.0 - alpha))


def alpha_divergence(g: GridDensity, f: GridDensity, alpha: float) -> float:
    """Amari alpha-divergence ``D_alpha(g, f)``; tends to ``KL(g, f)`` as alpha -> 1."""
    grid = same_grid(g, f)
    _check_alpha(alpha)
    if alpha > 1:
        _check_support(g, f)
    elif alpha < 0:
        _check_support(f, g)
    return _alpha_from_logs(g.log_values, f.log_values, alpha, grid.weights)


def _sym_alpha_from_logs(log_g, log_f, alpha, weights) -> float:
    return _alpha_from_logs(log_g, log_f, alpha, weights) + _alpha_from_logs(log_f, log_g, alpha, weights)


def sym_alpha_divergence(g: GridDensity, f: GridDensity, alpha: float) -> float:
    """``D_alpha(g, f) + D_alpha(f, g)``."""
    grid = same_grid(g, f)
    _check_alpha(alpha)
    if alpha > 1 or alpha < 0:
        _check_support(g, f)
        _check_support(f, g)
    return _sym_alpha_from_logs(g.log_values, f.log_values, alpha, grid.weights)


BALL_KINDS = ("kl", "alpha", "symalpha")


def _divergence_from_logs(kind, log_g, log_f, alpha, weights) -> float:
    if kind == "kl":
        return _kl_from_logs(log_g, log_f, weights)
    if kind == "alpha":
        return _alpha_from_logs(log_g, log_f, alpha, weights)
    return _sym_alpha_from_logs(log_g, log_f, alpha, weights)


def divergence(g: GridDensity, f: GridDensity, kind: str, alpha: float | None = None) -> float:
    """Dispatch on ``kind`` in ``BALL_KINDS``."""
    if kind == "kl":
        return kl_divergence(g, f)
    if kind == "alpha":
        return alpha_divergence(g, f, alpha)
    if kind == "symalpha":
        return sym_alpha_divergence(g, f, alpha)
    raise ParameterError(f"unknown divergence kind {kind!r}; expected one of {BALL_KINDS}")


@dataclass(frozen=True)
class DivergenceBall:
    """``{g : divergence(g, nominal) <= epsilon}``."""

    kind: str
    epsilon: float
    nominal: GridDensity
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in BALL_KINDS:
            raise ParameterError(f"unknown divergence kind {self.kind!r}; expected one of {BALL_KINDS}")
        if self.kind != "kl":
            if self.alpha is None:
                raise ParameterError(f"{self.kind} ball needs alpha")
            _check_alpha(self.alpha)
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ParameterError(f"ball radius must be finite and >= 0, got {self.epsilon}")

    def divergence(self, g: GridDensity) -> float:
        return divergence(g, self.nominal, self.kind, self.alpha)

    def contains(self, g: GridDensity, slack=0.0) -> bool:
        return self.divergence(g) <= self.epsilon + slack


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def cdf_knots(g: GridDensity) -> np.ndarray:
    """Cumulative trapezoid of ``g`` at the grid points, scaled to end at 1."""
    v = g.values
    steps = 0.5 * g.grid.h * (v[1:] + v[:-1])
    cdf = np.concatenate(([0.0], np.cumsum(steps)))
    return cdf / cdf[-1]


def sample(g: GridDensity, count: int, seed=None) -> np.ndarray:
    """I.i.d. draws by inverting the piecewise-linear grid CDF."""
    if int(count) != count or count < 1:
        raise ParameterError(f"count must be a positive integer, got {count}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return np.interp(rng.random(int(count)), cdf_knots(g), g.y)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_csv(g: GridDensity, path, header_comment: str | None = None):
    """Write ``y,value`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["y", "value"])
        for y, v in zip(g.y, g.values):
            w.writerow([f"{y:.17g}", f"{v:.17g}"])


def read_csv(path) -> GridDensity:
    """Inverse of :func:`write_csv`; the grid is recovered from the first/last abscissa."""
    ys, vs = [], []
    with open(path, newline="") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(rows)
        for row in reader:
            ys.append(float(row["y"]))
            vs.append(float(row["value"]))
    if len(ys) < 3:
        raise ParameterError(f"{path}: need at least 3 rows")
    return GridDensity(ys[0], ys[-1], vs)

