import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from robust_lrt import (
    RobustLrf,
    chernoff_exponent,
    log_mgf,
    monte_carlo_error,
    optimal_threshold,
    rate_curves,
    rate_function,
    solve_kl_lfd,
    u_affinity,
)
from robust_lrt.asymptotics import McEstimate, mean_statistic
from robust_lrt.errors import NumericError, ParameterError, RangeError


@pytest.fixture(scope="module")
def nominal_lrf(d1):
    return RobustLrf.nominal(d1)


class TestLogMgf:
    def test_zero_and_one(self, d1, nominal_lrf):
        assert log_mgf(nominal_lrf, d1.f0, 0.0) == 0.0
        # E_f0[l] = integral f1
        assert log_mgf(nominal_lrf, d1.f0, 1.0) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("u", [-1.5, -0.3, 0.4, 2.0])
    def test_gaussian_closed_form(self, d1, nominal_lrf, u):
        # under f0 the statistic 2y is N(-2, 4): Lambda(u) = -2u + 2u**2
        assert log_mgf(nominal_lrf, d1.f0, u) == pytest.approx(-2 * u + 2 * u * u, abs=1e-10)

    def test_affinity_identity(self, kl_d1):
        assert math.exp(log_mgf(kl_d1.lrf, kl_d1.g0_hat, kl_d1.u)) == pytest.approx(kl_d1.d_u, rel=1e-12)

    def test_mean(self, d1, nominal_lrf):
        assert mean_statistic(nominal_lrf, d1.f0) == pytest.approx(-2.0, abs=1e-10)
        assert mean_statistic(nominal_lrf, d1.f1) == pytest.approx(2.0, abs=1e-10)

    def test_errors(self, d1, nominal_lrf):
        with pytest.raises(ParameterError):
            log_mgf(nominal_lrf, d1.f0, math.inf)
        from robust_lrt import nominal_pair
        coarse = nominal_pair("d1", (-10.0, 10.0, 801))
        with pytest.raises(ParameterError):
            log_mgf(nominal_lrf, coarse.f0, 0.5)


class TestRateFunction:
    @pytest.mark.parametrize("t", [-1.9, -1.0, 0.0, 0.7, 1.9])
    def test_gaussian_closed_form(self, d1, nominal_lrf, t):
        assert rate_function(nominal_lrf, d1.f0, t) == pytest.approx((t + 2) ** 2 / 8, abs=1e-10)
        assert rate_function(nominal_lrf, d1.f1, t, "H1") == pytest.approx((t - 2) ** 2 / 8, abs=1e-10)

    def test_zero_at_mean(self, d1, nominal_lrf):
        assert rate_function(nominal_lrf, d1.f0, -2.0) == pytest.approx(0.0, abs=1e-12)

    def test_matched_identity_on_lfds(self, kl_d1):
        lrf, g0, g1 = kl_d1.lrf, kl_d1.g0_hat, kl_d1.g1_hat
        e0, e1 = mean_statistic(lrf, g0), mean_statistic(lrf, g1)
        for t in np.linspace(e0, e1, 23)[1:-1]:
            assert rate_function(lrf, g1, t, "H1") == pytest.approx(rate_function(lrf, g0, t) - t, abs=1e-9)

    def test_validation(self, d1, nominal_lrf):
        with pytest.raises(ParameterError):
            rate_function(nominal_lrf, d1.f0, 0.0, "H2")
        with pytest.raises(ParameterError):
            rate_function(nominal_lrf, d1.f0, math.nan)

    def test_out_of_range(self, d1, nominal_lrf):
        # the statistic is bounded by 24 on the grid
        with pytest.raises(RangeError):
            rate_function(nominal_lrf, d1.f0, 30.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-1.95, 1.95))
    def test_convex_and_nonnegative(self, t):
        from robust_lrt import nominal_pair
        d1 = nominal_pair("d1", (-10.0, 10.0, 801))
        lrf = RobustLrf.nominal(d1)
        h = 1e-3
        vals = [rate_function(lrf, d1.f0, t + k * h) for k in (-1, 0, 1)]
        assert vals[1] >= 0
        assert vals[0] + vals[2] - 2 * vals[1] >= -1e-10


class TestCurves:
    def test_nan_outside_mean_interval(self, d1, nominal_lrf):
        curve = rate_curves(nominal_lrf, d1.f0, d1.f1, [-3.0, 0.0, 3.0], "n", "n")
        assert np.isnan(curve.i0[0]) and np.isnan(curve.i1[2])
        assert curve.i0[1] == pytest.approx(0.5, abs=1e-10)
        assert curve.valid == pytest.approx((-2.0, 2.0), abs=1e-10)

    def test_csv(self, d1, nominal_lrf, tmp_path):
        curve = rate_curves(nominal_lrf, d1.f0, d1.f1, np.linspace(-3, 3, 7), "n", "n")
        curve.write_csv(tmp_path / "r.csv", "hdr")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[1] == "t,i0,i1,test_tag,data_tag"
        assert lines[2].startswith("-3,nan,")
        assert lines[-1].endswith(",n,n")


class TestThresholdAndChernoff:
    def test_nominal(self, d1, nominal_lrf):
        assert optimal_threshold(nominal_lrf, d1.f0, d1.f1) == pytest.approx(0.0, abs=1e-9)
        assert chernoff_exponent(d1.f0, d1.f1) == pytest.approx(0.5, abs=1e-9)

    def test_lfd_pair(self, kl_d1_opt):
        ce = chernoff_exponent(kl_d1_opt)
        assert ce == pytest.approx(-math.log(kl_d1_opt.d_u), abs=1e-9)
        t = optimal_threshold(kl_d1_opt.lrf, kl_d1_opt.g0_hat, kl_d1_opt.g1_hat)
        assert t == pytest.approx(0.0, abs=1e-8)
        assert rate_function(kl_d1_opt.lrf, kl_d1_opt.g0_hat, 0.0) == pytest.approx(ce, abs=1e-8)

    def test_asymmetric_pair(self, d2):
        sol = solve_kl_lfd(d2, 0.1, 0.1, 0.56)
        ce = chernoff_exponent(sol)
        us = np.linspace(0.01, 0.99, 197)
        best = min(u_affinity(sol.g0_hat, sol.g1_hat, u) for u in us)
        assert ce >= -math.log(best) - 1e-12
        assert ce == pytest.approx(-math.log(best), abs=1e-5)

    def test_needs_two_densities(self, d1):
        with pytest.raises(ParameterError):
            chernoff_exponent(d1.f0)


class TestMonteCarlo:
    def test_exact_probability(self, d1, nominal_lrf):
        # mean of n statistics under f0 is N(-2, 4/n); P(S_5 > 0) is known exactly
        est = monte_carlo_error(nominal_lrf, d1.f0, d1.f1, [5], 100_000, 0.0, seed=5)
        p = stats.norm.sf(2.0 / math.sqrt(4 / 5))
        sd = math.sqrt(p * (1 - p) / 100_000)
        assert abs(est.pf_hat[0] - p) <= 4 * sd
        assert abs(est.pm_hat[0] - p) <= 4 * sd

    def test_reproducible_and_order_free(self, d1, nominal_lrf):
        a = monte_carlo_error(nominal_lrf, d1.f0, d1.f1, [2, 4], 2000, 0.0, seed=1)
        b = monte_carlo_error(nominal_lrf, d1.f0, d1.f1, [2, 4], 2000, 0.0, seed=1)
        np.testing.assert_array_equal(a.pf_hat, b.pf_hat)
        c = monte_carlo_error(nominal_lrf, d1.f0, d1.f1, [2, 4], 2000, 0.0, seed=2)
        assert not np.array_equal(a.pf_hat, c.pf_hat)

    def test_validation(self, d1, nominal_lrf):
        with pytest.raises(ParameterError):
            monte_carlo_error(nominal_lrf, d1.f0, d1.f1, [5], 999, 0.0)
        with pytest.raises(ParameterError):
            monte_carlo_error(nominal_lrf, d1.f0, d1.f1, [0], 1000, 0.0)

    def test_decay_rate_needs_events(self):
        est = McEstimate(np.array([5, 10]), np.array([0.1, 0.0]), np.array([0.1, 0.0]), 1000, 0, 0.0)
        with pytest.raises(NumericError):
            est.decay_rate()

    def test_decay_rate_fit(self):
        n = np.array([5, 10, 20])
        est = McEstimate(n, np.exp(-0.5 * n), np.exp(-0.25 * n), 1000, 0, 0.0)
        assert est.decay_rate("pf") == pytest.approx(0.5)
        assert est.decay_rate("pm") == pytest.approx(0.25)

    def test_csv(self, tmp_path):
        est = McEstimate(np.array([5]), np.array([0.25]), np.array([0.5]), 1000, 0, 0.0)
        est.write_csv(tmp_path / "mc.csv", "hdr")
        assert (tmp_path / "mc.csv").read_text().splitlines()[1:] == ["n,pf_hat,pm_hat", "5,0.25,0.5"]
