"""Command-line interface.

Every subcommand writes CSV data plus a JSON summary into ``--out`` and
prefixes each file with the invocation and library version.  Options can
also come from a JSON file given with ``--config``; flags on the command line
take precedence over the file.

Exit codes: 0 success, 2 parameter error, 3 solver non-convergence,
4 infeasible parameters.
"""

from __future__ import annotations

import json
import math
import shlex
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .asymptotics import monte_carlo_error, rate_curves, rate_function
from .density import BALL_KINDS, DEFAULT_GRID, NOMINAL_TABLE, nominal_pair, write_csv
from .errors import InfeasibleParameterError, NumericError, ParameterError, RobustLrtError, SolverError
from .lfd_bayes import RobustLrf, _json_default, minimize_over_u, save_solution, solve_lfd, u_scan
from .lfd_np import dabak_lfds, solve_np, thresholds

EXIT_OK, EXIT_PARAM, EXIT_SOLVER, EXIT_INFEASIBLE = 0, 2, 3, 4
SOURCES = ("a", "a_star", "n")
CONFIG_KEYS = {
    "nominal", "ball", "alpha", "eps", "u", "grid", "out", "seed", "trials", "t",
    "scan_points", "u_range", "variant", "tests", "data", "n_values", "test", "dabak",
}


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _floats(text, what):
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ParameterError(f"{what}: expected comma-separated numbers, got {text!r}")


def parse_eps(text):
    vals = _floats(text, "--eps")
    if len(vals) not in (1, 2):
        raise ParameterError(f"--eps takes one or two radii, got {text!r}")
    e0, e1 = vals[0], vals[-1]
    if not (e0 >= 0 and e1 >= 0 and math.isfinite(e0) and math.isfinite(e1)):
        raise ParameterError(f"--eps radii must be finite and non-negative, got {text!r}")
    return e0, e1


def parse_grid(text):
    vals = _floats(text, "--grid")
    if len(vals) != 3 or vals[2] != int(vals[2]):
        raise ParameterError(f"--grid expects lo,hi,n, got {text!r}")
    return vals[0], vals[1], int(vals[2])


def parse_u(text):
    if text is None or str(text).strip().lower() == "auto":
        return None
    (u,) = _floats(text, "--u")
    if not 0.0 < u < 1.0:
        raise ParameterError(f"--u must lie in (0, 1) or be 'auto', got {text!r}")
    return u


def parse_t(text):
    """A single threshold or an ``lo,hi,n`` grid."""
    vals = _floats(text, "--t")
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) == 3 and vals[2] == int(vals[2]) and vals[2] >= 1:
        return np.linspace(vals[0], vals[1], int(vals[2]))
    raise ParameterError(f"--t expects a real or lo,hi,n, got {text!r}")


def parse_sources(text, what):
    items = text if isinstance(text, (list, tuple)) else [s.strip() for s in str(text).split(",") if s.strip()]
    bad = [s for s in items if s not in SOURCES]
    if bad or not items:
        raise ParameterError(f"{what}: expected a subset of {', '.join(SOURCES)}, got {text!r}")
    return list(items)


@dataclass
class ScenarioConfig:
    """Validated scenario shared by all subcommands."""

    nominal: str = "d1"
    ball: str = "kl"
    alpha: float | None = None
    eps0: float = 0.1
    eps1: float = 0.1
    grid: tuple = DEFAULT_GRID
    u: float | None = None
    out: Path = Path(".")
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, values: dict) -> "ScenarioConfig":
        nominal = values.get("nominal") or "d1"
        if nominal not in NOMINAL_TABLE:
            raise ParameterError(f"--nominal must be one of {sorted(NOMINAL_TABLE)}, got {nominal!r}")
        ball = values.get("ball") or "kl"
        if ball not in BALL_KINDS:
            raise ParameterError(f"--ball must be one of {', '.join(BALL_KINDS)}, got {ball!r}")
        alpha = values.get("alpha")
        if ball == "kl":
            alpha = None
        elif alpha is None:
            raise ParameterError(f"--ball {ball} needs --alpha")
        else:
            alpha = float(alpha)
            if not (alpha > 0 and alpha != 1 and math.isfinite(alpha)):
                raise ParameterError(f"--alpha must be positive and different from 1, got {alpha}")
        eps0, eps1 = parse_eps(values["eps"]) if values.get("eps") is not None else (0.1, 0.1)
        grid = parse_grid(values["grid"]) if values.get("grid") is not None else DEFAULT_GRID
        u = parse_u(values.get("u"))
        out = Path(values.get("out") or ".")
        extra = {k: v for k, v in values.items() if k not in {"nominal", "ball", "alpha", "eps", "grid", "u", "out"}}
        return cls(nominal, ball, alpha, eps0, eps1, grid, u, out, extra)

    def nominals(self):
        return nominal_pair(self.nominal, self.grid)

    def describe(self) -> dict:
        return {"nominal": self.nominal, "ball": self.ball, "alpha": self.alpha, "eps0": self.eps0,
                "eps1": self.eps1, "grid": list(self.grid), "u": "auto" if self.u is None else self.u}


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

class _Run:
    """Per-invocation state: the header text and the merged configuration."""

    def __init__(self, argv):
        self.header = f"robust-lrt {__version__}\ninvocation: {shlex.join(['robust-lrt', *argv])}"

    def config(self, ctx_params: dict) -> ScenarioConfig:
        values = {}
        path = ctx_params.pop("config", None)
        if path:
            try:
                doc = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ParameterError(f"cannot read config file {path}: {exc}")
            if not isinstance(doc, dict):
                raise ParameterError(f"config file {path} must hold a JSON object")
            unknown = set(doc) - CONFIG_KEYS
            if unknown:
                raise ParameterError(f"unknown config keys: {', '.join(sorted(unknown))}")
            values.update(doc)
        values.update({k: v for k, v in ctx_params.items() if v is not None})
        cfg = ScenarioConfig.build(values)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return cfg

    def write_json(self, path, doc):
        doc = {"header": self.header, **doc}
        Path(path).write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")


def scenario_options(func):
    opts = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False), help="JSON file with option values."),
        click.option("--nominal", type=click.Choice(sorted(NOMINAL_TABLE)), help="Nominal pair (default d1)."),
        click.option("--ball", type=click.Choice(BALL_KINDS), help="Divergence ball (default kl)."),
        click.option("--alpha", type=float, help="Order of the alpha or symmetrized alpha divergence."),
        click.option("--eps", help="Radii e0[,e1] (default 0.1)."),
        click.option("--u", "u", help="Affinity exponent in (0,1) or 'auto' (default auto)."),
        click.option("--grid", help="Grid lo,hi,n (default -12,12,4801)."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory (default .)."),
    ]
    for opt in reversed(opts):
        func = opt(func)
    return func


def _solve_bayes(cfg, nominals):
    if cfg.u is None:
        return minimize_over_u(nominals, cfg.ball, cfg.eps0, cfg.eps1, cfg.alpha)
    return solve_lfd(nominals, cfg.ball, cfg.eps0, cfg.eps1, cfg.u, cfg.alpha)


def _sources(cfg, nominals, wanted):
    """Test LRFs and data pairs for the tags ``a`` (minimax), ``a_star`` (geodesic) and ``n`` (nominal)."""
    pairs, info = {}, {}
    if "a" in wanted:
        sol = _solve_bayes(cfg, nominals)
        pairs["a"] = (sol.lrf, sol.g0_hat, sol.g1_hat)
        info["u_hat"] = sol.u
    if "a_star" in wanted:
        dab = dabak_lfds(nominals, cfg.eps0, cfg.eps1)
        pairs["a_star"] = (dab.lrf, dab.g0_star, dab.g1_star)
        info["dabak"] = dab.summary()
    if "n" in wanted:
        pairs["n"] = (RobustLrf.nominal(nominals), nominals.f0, nominals.f1)
    return pairs, info


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="robust-lrt")
def cli():
    """Least favorable distributions and robust likelihood ratio tests."""


@cli.command("lfd")
@scenario_options
@click.pass_context
def cmd_lfd(ctx, **params):
    """Nominal and least favorable densities plus a solution summary."""
    run = ctx.obj
    cfg = run.config(params)
    nominals = cfg.nominals()
    sol = _solve_bayes(cfg, nominals)
    write_csv(nominals.f0, cfg.out / "nominal_f0.csv", run.header)
    write_csv(nominals.f1, cfg.out / "nominal_f1.csv", run.header)
    save_solution(sol, cfg.out, "lfd", run.header, nominals,
                  {"scenario": cfg.describe(), "u_optimized": cfg.u is None})
    click.echo(f"u={sol.u:.6g} d_u={sol.d_u:.10g} -> {cfg.out}")


@cli.command("lrf")
@scenario_options
@click.pass_context
def cmd_lrf(ctx, **params):
    """Robust and nominal likelihood ratio functions."""
    run = ctx.obj
    cfg = run.config(params)
    nominals = cfg.nominals()
    sol = _solve_bayes(cfg, nominals)
    nominal = RobustLrf.nominal(nominals)
    sol.lrf.write_csv(cfg.out / "lrf.csv", run.header, nominal)
    run.write_json(cfg.out / "lrf.json", {
        "scenario": cfg.describe(), "u": sol.u, "u_optimized": cfg.u is None, "d_u": sol.d_u,
        "max_robust_lrf": float(sol.lrf.values.max()), "max_nominal_lrf": float(nominal.values.max()),
        "files": {"lrf": "lrf.csv"},
    })
    click.echo(f"u={sol.u:.6g} -> {cfg.out / 'lrf.csv'}")


@cli.command("uscan")
@scenario_options
@click.option("--scan-points", type=int, help="Number of u values (default 49).")
@click.option("--u-range", help="Scan interval lo,hi inside (0,1) (default 0.02,0.98).")
@click.pass_context
def cmd_uscan(ctx, **params):
    """Affinity of the LFD pair and the multipliers along a u grid."""
    run = ctx.obj
    cfg = run.config(params)
    points = int(cfg.extra.get("scan_points") or 49)
    if points < 3:
        raise ParameterError(f"--scan-points must be at least 3, got {points}")
    u_range = _floats(cfg.extra.get("u_range") or "0.02,0.98", "--u-range")
    if len(u_range) != 2 or not 0 < u_range[0] < u_range[1] < 1:
        raise ParameterError(f"--u-range must be lo,hi with 0 < lo < hi < 1, got {u_range}")
    scan = u_scan(cfg.nominals(), cfg.ball, cfg.eps0, cfg.eps1, cfg.alpha, tuple(u_range), points)
    ok = scan.converged()
    if not ok.any():
        raise SolverError("no u value converged")
    scan.write_csv(cfg.out / "uscan.csv", run.header)
    k = int(np.nanargmin(scan.d_u))
    d2 = np.diff(scan.d_u[ok], 2)
    run.write_json(cfg.out / "uscan.json", {
        "scenario": cfg.describe(), "scan_points": points, "u_range": u_range,
        "u_min_on_scan": float(scan.u[k]), "d_u_min": float(scan.d_u[k]),
        "converged": int(ok.sum()), "failures": scan.failures,
        "second_difference_changes_sign": bool(d2.size and d2.min() < 0 < d2.max()),
        "files": {"scan": "uscan.csv"},
    })
    click.echo(f"u_min={scan.u[k]:.4g} ({int(ok.sum())}/{ok.size} converged) -> {cfg.out / 'uscan.csv'}")


@cli.command("np")
@scenario_options
@click.option("--variant", type=click.Choice(["I", "II"]), help="Neyman-Pearson test type (default I).")
@click.option("--dabak/--no-dabak", default=None, help="Also write the geodesic pair.")
@click.pass_context
def cmd_np(ctx, **params):
    """Least favorable densities of the asymptotic Neyman-Pearson tests."""
    run = ctx.obj
    cfg = run.config(params)
    if cfg.ball != "kl":
        raise ParameterError("np supports --ball kl only")
    variant = cfg.extra.get("variant") or "I"
    nominals = cfg.nominals()
    sol = solve_np(nominals, cfg.eps0, cfg.eps1, variant)
    stem = f"np_{variant}"
    write_csv(sol.g0_hat, cfg.out / f"{stem}_g0.csv", run.header)
    write_csv(sol.g1_hat, cfg.out / f"{stem}_g1.csv", run.header)
    sol.lrf.write_csv(cfg.out / f"{stem}_lrf.csv", run.header, RobustLrf.nominal(nominals))
    doc = {"scenario": cfg.describe(), **sol.summary(),
           "thresholds": thresholds(sol.lrf, sol.g0_hat, sol.g1_hat),
           "files": {"g0_hat": f"{stem}_g0.csv", "g1_hat": f"{stem}_g1.csv", "lrf": f"{stem}_lrf.csv"}}
    if cfg.extra.get("dabak"):
        dab = dabak_lfds(nominals, cfg.eps0, cfg.eps1)
        write_csv(dab.g0_star, cfg.out / "dabak_g0.csv", run.header)
        write_csv(dab.g1_star, cfg.out / "dabak_g1.csv", run.header)
        doc["dabak"] = {**dab.summary(), "thresholds": thresholds(dab.lrf, dab.g0_star, dab.g1_star)}
        doc["files"].update({"dabak_g0": "dabak_g0.csv", "dabak_g1": "dabak_g1.csv"})
    run.write_json(cfg.out / f"{stem}.json", doc)
    click.echo(f"variant={variant} exponent={sol.exponent:.10g} -> {cfg.out}")


@cli.command("rates")
@scenario_options
@click.option("--tests", help="Test LRFs among a,a_star,n (default all).")
@click.option("--data", help="Data sources among a,a_star,n (default all).")
@click.option("--t", "t", help="Threshold grid lo,hi,n (default -2.5,2.5,101).")
@click.pass_context
def cmd_rates(ctx, **params):
    """Rate functions for every (test, data) combination.

    ``a`` is the minimax test, ``a_star`` the geodesic (Dabak) test and ``n``
    the nominal test.  The summary marks the geodesic thresholds ``t0`` and
    ``t1`` and the rate values there.
    """
    run = ctx.obj
    cfg = run.config(params)
    tests = parse_sources(cfg.extra.get("tests") or "a,a_star,n", "--tests")
    data = parse_sources(cfg.extra.get("data") or "a,a_star,n", "--data")
    t_grid = parse_t(cfg.extra.get("t") or "-2.5,2.5,101")
    nominals = cfg.nominals()
    if cfg.ball != "kl" and "a_star" in set(tests) | set(data):
        raise ParameterError("the geodesic test is defined for --ball kl only")
    wanted = set(tests) | set(data)
    if cfg.ball == "kl":
        wanted.add("a_star")
    pairs, info = _sources(cfg, nominals, wanted)
    markers = {}
    if "a_star" in pairs:
        t0, t1 = thresholds(*pairs["a_star"])
        markers = {"t0": t0, "t1": t1}
    files, at_markers = {}, {}
    for test in tests:
        lrf = pairs[test][0]
        for src in data:
            _, g0, g1 = pairs[src]
            curve = rate_curves(lrf, g0, g1, t_grid, test, src)
            name = f"rates_{test}_{src}.csv"
            curve.write_csv(cfg.out / name, run.header)
            files[f"{test}|{src}"] = name
            if markers:
                at_markers[f"{test}|{src}"] = {
                    "i0_at_t1": rate_function(lrf, g0, markers["t1"], "H0"),
                    "i1_at_t0": rate_function(lrf, g1, markers["t0"], "H1"),
                    "i0_at_0": rate_function(lrf, g0, 0.0, "H0"),
                    "i1_at_0": rate_function(lrf, g1, 0.0, "H1"),
                }
    run.write_json(cfg.out / "rates.json", {
        "scenario": cfg.describe(), "tests": tests, "data": data, **info,
        "markers": markers, "rates_at_markers": at_markers, "files": files,
    })
    click.echo(f"{len(files)} rate curves -> {cfg.out}")


@cli.command("mc")
@scenario_options
@click.option("--test", "test", type=click.Choice(SOURCES), help="Test LRF (default n).")
@click.option("--data", type=click.Choice(SOURCES), help="Data source (default: same as --test).")
@click.option("--n-values", help="Sample sizes (default 5,10,20,40).")
@click.option("--trials", type=int, help="Trials per sample size (default 100000).")
@click.option("--t", "t", help="Threshold (default 0).")
@click.option("--seed", type=int, help="Root seed (default 0).")
@click.pass_context
def cmd_mc(ctx, **params):
    """Monte Carlo false-alarm and miss probabilities of a test."""
    run = ctx.obj
    cfg = run.config(params)
    test = cfg.extra.get("test") or "n"
    src = cfg.extra.get("data") or test
    parse_sources([test, src], "--test/--data")
    n_values = [int(v) for v in _floats(cfg.extra.get("n_values") or "5,10,20,40", "--n-values")]
    trials = int(cfg.extra.get("trials") or 100_000)
    t = parse_t(cfg.extra.get("t") if cfg.extra.get("t") is not None else "0")
    if t.size != 1:
        raise ParameterError("mc takes a single threshold")
    seed = int(cfg.extra.get("seed") or 0)
    nominals = cfg.nominals()
    pairs, info = _sources(cfg, nominals, {test, src})
    est = monte_carlo_error(pairs[test][0], pairs[src][1], pairs[src][2], n_values, trials, float(t[0]), seed)
    est.write_csv(cfg.out / "mc.csv", run.header)
    rates = {}
    for which in ("pf", "pm"):
        try:
            rates[which] = est.decay_rate(which)
        except NumericError:
            rates[which] = None
    run.write_json(cfg.out / "mc.json", {
        "scenario": cfg.describe(), "test": test, "data": src, "n_values": n_values, "trials": trials,
        "t": float(t[0]), "seed": seed, **info, "decay_rate": rates,
        "zero_cells": {"pf": est.pf_zero.tolist(), "pm": est.pm_zero.tolist()}, "files": {"mc": "mc.csv"},
    })
    click.echo(f"pf decay={rates['pf']} pm decay={rates['pm']} -> {cfg.out / 'mc.csv'}")


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    """Run the CLI and return the exit code instead of exiting."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cli.main(args=argv, prog_name="robust-lrt", standalone_mode=False, obj=_Run(argv))
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_PARAM
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_PARAM
    except InfeasibleParameterError as exc:
        click.echo(f"infeasible: {exc}", err=True)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        click.echo(f"solver did not converge: {exc}", err=True)
        return EXIT_SOLVER
    except NumericError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_SOLVER
    except RobustLrtError as exc:
        click.echo(f"parameter error: {exc}", err=True)
        return EXIT_PARAM
    return EXIT_OK


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
