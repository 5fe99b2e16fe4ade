"""Compare the compiled and numpy pointwise kernels.

Both implementations are imported directly, so the comparison does not
depend on which backend ``robust_lrt.kernels`` picked at import.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from robust_lrt import _kernels_py, nominal_pair
from robust_lrt.lfd_bayes import small_ball_init

try:
    from robust_lrt import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

CASES = [
    ("kl", None),
    ("alpha", 0.5),
    ("alpha", 2.0),
    ("symalpha", 0.5),
    ("symalpha", 2.0),
]
CODES = {"kl": _kernels_py.KL, "alpha": _kernels_py.ALPHA, "symalpha": _kernels_py.SYM}


def run(repeat):
    nominals = nominal_pair("d1")
    log_l = nominals.log_lr
    print(f"grid points: {log_l.size}")
    print(f"{'family':<14}{'numpy [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}{'max |dw|':>12}")
    for kind, alpha in CASES:
        mult = small_ball_init(nominals, kind, 0.5, 0.1, 0.1)
        args = (log_l, CODES[kind], 0.0 if alpha is None else alpha, 0.5, *mult)
        t_py = min(timeit.repeat(lambda: _kernels_py.solve_lrf(*args), number=1, repeat=repeat))
        label = kind if alpha is None else f"{kind}({alpha:g})"
        if _compiled is None:
            print(f"{label:<14}{1e3 * t_py:>12.2f}{'n/a':>13}")
            continue
        t_cy = min(timeit.repeat(lambda: _compiled.solve_lrf(*args), number=1, repeat=repeat))
        w_py = _kernels_py.solve_lrf(*args)[0]
        w_cy = _compiled.solve_lrf(*args)[0]
        dw = float(np.max(np.abs(w_py - w_cy)))
        print(f"{label:<14}{1e3 * t_py:>12.2f}{1e3 * t_cy:>13.2f}{t_py / t_cy:>10.1f}{dw:>12.2e}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    run(parser.parse_args().repeat)
