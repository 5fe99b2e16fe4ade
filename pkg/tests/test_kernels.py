import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_lrt import _kernels_py, kernels
from robust_lrt.errors import InfeasibleParameterError
from robust_lrt.lfd_bayes import small_ball_init

try:
    from robust_lrt import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

FAMILIES = [("kl", None), ("alpha", 0.1), ("alpha", 0.5), ("alpha", 2.0), ("symalpha", 0.5), ("symalpha", 2.0)]
CODES = {"kl": _kernels_py.KL, "alpha": _kernels_py.ALPHA, "symalpha": _kernels_py.SYM}


def kernel_args(nominals, kind, alpha, u=0.5, eps=0.1):
    mult = small_ball_init(nominals, kind, u, eps, eps)
    return (nominals.log_lr, CODES[kind], 0.0 if alpha is None else alpha, u, *mult)


class TestBackendSelection:
    def test_backend_name(self):
        assert kernels.BACKEND in ("cython", "python")
        if compiled is not None:
            assert kernels.BACKEND == "cython"

    def test_environment_forces_fallback(self):
        env = dict(os.environ, ROBUST_LRT_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", "from robust_lrt import BACKEND; print(BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"


class TestPsi:
    @settings(max_examples=100)
    @given(st.sampled_from(FAMILIES[1:]), st.floats(-20, 20))
    def test_increasing(self, fam, t):
        kind, alpha = fam
        assert _kernels_py.dpsi_dt(np.array(t), CODES[kind], alpha) > 0
        assert _kernels_py.psi(np.array(t + 1e-3), CODES[kind], alpha) > _kernels_py.psi(np.array(t), CODES[kind], alpha)

    @settings(max_examples=100)
    @given(st.sampled_from(FAMILIES), st.floats(-15, 15))
    def test_inverse(self, fam, t):
        kind, alpha = fam
        code = CODES[kind]
        v = _kernels_py.psi(np.array([t]), code, alpha)
        back = _kernels_py.psi_inverse(v, code, alpha)
        assert back[0] == pytest.approx(t, abs=1e-9 * (1 + abs(t)))

    def test_zero_at_unit_ratio(self):
        for kind, alpha in FAMILIES[1:]:
            assert _kernels_py.psi(np.array(0.0), CODES[kind], alpha) == pytest.approx(0.0, abs=1e-15)
        assert _kernels_py.psi(np.array(0.0), _kernels_py.KL, 0.0) == 1.0


class TestSolveLrf:
    @pytest.mark.parametrize("kind,alpha", FAMILIES)
    def test_pointwise_equations(self, d1, kind, alpha):
        args = kernel_args(d1, kind, alpha)
        log_l, code, a, u, lam0, mu0, lam1, mu1 = args
        w, t0, t1 = kernels.solve_lrf(*args)
        np.testing.assert_allclose(w, log_l + t1 - t0, atol=1e-10)
        v0 = ((1 - u) * np.exp(u * w) - mu0) / lam0
        v1 = (u * np.exp((u - 1) * w) - mu1) / lam1
        # compare in t: psi is flat in the far tails for some families
        np.testing.assert_allclose(t0, _kernels_py.psi_inverse(v0, code, a), atol=1e-8)
        np.testing.assert_allclose(t1, _kernels_py.psi_inverse(v1, code, a), atol=1e-8)

    @pytest.mark.skipif(compiled is None, reason="compiled extension not built")
    @pytest.mark.parametrize("kind,alpha", FAMILIES)
    def test_backends_agree(self, d2, kind, alpha):
        args = kernel_args(d2, kind, alpha, u=0.4)
        w_py, t0_py, t1_py = _kernels_py.solve_lrf(*args)
        w_cy, t0_cy, t1_cy = compiled.solve_lrf(*args)
        np.testing.assert_allclose(w_cy, w_py, atol=1e-9)
        np.testing.assert_allclose(t0_cy, t0_py, atol=1e-9)
        np.testing.assert_allclose(t1_cy, t1_py, atol=1e-9)

    @pytest.mark.skipif(compiled is None, reason="compiled extension not built")
    def test_backends_agree_on_lambert(self):
        L = np.linspace(-50, 800, 1001)
        np.testing.assert_allclose(compiled.lambert_w0_exp(L), _kernels_py.lambert_w0_exp(L), rtol=1e-14)

    def test_monotone_in_nominal_ratio(self, d1):
        w, _, _ = kernels.solve_lrf(*kernel_args(d1, "alpha", 2.0))
        assert np.all(np.diff(w) > 0)

    def test_empty_domain(self, d1):
        # -mu0/lam0 exceeds the supremum 2 of psi for alpha = 0.5
        with pytest.raises(InfeasibleParameterError):
            kernels.solve_lrf(d1.log_lr, _kernels_py.ALPHA, 0.5, 0.5, 1.0, -10.0, 1.0, 0.0)
