"""Backend switch for the pointwise kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is imported.  Set ``ROBUST_LRT_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _kernels_py
from ._kernels_py import ALPHA, KL, SYM, dpsi_dt, psi, psi_inverse, psi_range, w_domain  # noqa: F401

BACKEND = "python"
solve_lrf = _kernels_py.solve_lrf
lambert_w0_exp = _kernels_py.lambert_w0_exp

if not os.environ.get("ROBUST_LRT_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        solve_lrf = _compiled.solve_lrf
        lambert_w0_exp = _compiled.lambert_w0_exp
        BACKEND = "cython"

FAMILY_CODES = {"kl": KL, "alpha": ALPHA, "symalpha": SYM}
