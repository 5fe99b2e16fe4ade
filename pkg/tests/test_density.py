import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci_integrate
from scipy import stats

from robust_lrt import (
    DivergenceBall,
    Grid,
    GridDensity,
    alpha_divergence,
    divergence,
    kl_divergence,
    make_nominal,
    nominal_pair,
    sym_alpha_divergence,
    u_affinity,
)
from robust_lrt.density import (
    Gaussian,
    Laplace,
    LaplaceSine,
    cdf_knots,
    integrate,
    log_integrate_exp,
    read_csv,
    sample,
    write_csv,
)
from robust_lrt.errors import DomainError, NumericError, ParameterError


def gaussian_affinity(m0, v0, m1, v1, u):
    """Closed form of the integral of N(m1, v1)**u * N(m0, v0)**(1-u)."""
    s = u * v0 + (1 - u) * v1
    return math.sqrt(v0 ** u * v1 ** (1 - u) / s) * math.exp(-u * (1 - u) * (m1 - m0) ** 2 / (2 * s))


def gaussian_kl(m0, v0, m1, v1):
    return 0.5 * (math.log(v1 / v0) + (v0 + (m0 - m1) ** 2) / v1 - 1.0)


def pair(m0, v0, m1, v1, grid=(-30.0, 30.0, 12001)):
    return make_nominal(Gaussian(m0, v0), grid), make_nominal(Gaussian(m1, v1), grid)


class TestGrid:
    def test_points_and_weights(self):
        g = Grid(-1.0, 1.0, 5)
        np.testing.assert_allclose(g.points, [-1, -0.5, 0, 0.5, 1])
        assert g.h == 0.5
        assert g.weights.sum() == pytest.approx(2.0)
        assert g.weights[0] == g.weights[-1] == 0.25

    @pytest.mark.parametrize("args", [(1.0, 0.0, 5), (0.0, 1.0, 2), (0.0, math.inf, 5), (0.0, 1.0, 4.5)])
    def test_rejects_bad_grids(self, args):
        with pytest.raises(ParameterError):
            Grid(*args)

    def test_arrays_are_read_only(self):
        g = Grid(0.0, 1.0, 11)
        with pytest.raises(ValueError):
            g.weights[0] = 1.0

    def test_trapezoid_is_exact_for_linear_functions(self):
        g = Grid(-2.0, 3.0, 7)
        assert integrate(3.0 * g.points + 1.0, g) == pytest.approx(12.5, abs=1e-13)

    def test_log_integrate_exp_avoids_overflow(self):
        g = Grid(0.0, 1.0, 101)
        assert log_integrate_exp(np.full(101, 1000.0), g) == pytest.approx(1000.0, abs=1e-12)

    def test_integrate_shape_mismatch(self):
        with pytest.raises(ParameterError):
            integrate(np.ones(3), Grid(0.0, 1.0, 5))


class TestGridDensity:
    def test_normalize(self):
        g = GridDensity(0.0, 1.0, np.ones(11) * 3.0, normalize=True)
        assert g.mass() == pytest.approx(1.0)

    @pytest.mark.parametrize("values", [[1.0, -1.0, 1.0], [0.0, 0.0, 0.0], [1.0, np.nan, 1.0]])
    def test_rejects_bad_values(self, values):
        with pytest.raises((ParameterError, NumericError)):
            GridDensity(0.0, 1.0, values)

    def test_moments_of_gaussian(self):
        g = make_nominal(Gaussian(0.5, 2.0))
        assert g.mean() == pytest.approx(0.5, abs=1e-9)
        assert g.variance() == pytest.approx(2.0, abs=1e-8)

    def test_reflection(self, d1):
        np.testing.assert_allclose(d1.f0.reflected().values, d1.f1.values, rtol=1e-12, atol=1e-300)

    def test_reflection_needs_symmetric_grid(self):
        with pytest.raises(ParameterError):
            GridDensity(0.0, 1.0, np.ones(5)).reflected()

    def test_from_log_normalize(self):
        grid = Grid(-5.0, 5.0, 101)
        g = GridDensity.from_log(grid, -0.5 * grid.points ** 2 + 700.0, normalize=True)
        assert g.mass() == pytest.approx(1.0, abs=1e-12)


class TestNominals:
    @pytest.mark.parametrize("label", ["d1", "d2", "d3"])
    def test_unit_mass(self, label):
        p = nominal_pair(label)
        assert p.f0.mass() == pytest.approx(1.0, abs=1e-14)
        assert p.f1.mass() == pytest.approx(1.0, abs=1e-14)

    def test_laplace_sine_against_quadrature(self):
        # normalizing constant of the modulated density on the real line
        val, _ = sci_integrate.quad(lambda y: LaplaceSine().pdf(np.array([y]))[0], -40, 40, limit=400)
        p = nominal_pair("d3")
        raw = make_nominal(LaplaceSine(), p.grid, normalize=False)
        assert raw.mass() == pytest.approx(val, rel=1e-5)

    def test_unknown_label(self):
        with pytest.raises(ParameterError):
            nominal_pair("d9")

    def test_bad_family_parameters(self):
        with pytest.raises(ParameterError):
            make_nominal(Gaussian(0.0, -1.0))
        with pytest.raises(ParameterError):
            make_nominal(Laplace(0.0, 0.0))

    def test_swapped(self, d2):
        s = d2.swapped()
        assert s.f0 is d2.f1 and s.f1 is d2.f0
        np.testing.assert_array_equal(s.log_lr, -d2.log_lr)


class TestAffinityAndDivergences:
    def test_d1_affinity(self, d1):
        assert u_affinity(d1.f0, d1.f1, 0.5) == pytest.approx(math.exp(-0.5), abs=1e-10)

    def test_d1_kl(self, d1):
        assert kl_divergence(d1.f0, d1.f1) == pytest.approx(2.0, abs=1e-10)

    def test_d2_kl(self):
        # wide grid: on the default one the variance-4 tail is truncated
        d2 = nominal_pair("d2", (-40.0, 40.0, 16001))
        assert kl_divergence(d2.f0, d2.f1) == pytest.approx(gaussian_kl(-1, 1, 1, 4), abs=1e-10)
        assert kl_divergence(d2.f1, d2.f0) == pytest.approx(gaussian_kl(1, 4, -1, 1), abs=1e-10)

    @pytest.mark.parametrize("alpha", [-0.5, 0.1, 0.5, 1.5, 2.0])
    def test_alpha_divergence_gaussian(self, alpha):
        g, f = pair(0.3, 1.5, -0.2, 1.0)
        expected = (1.0 - gaussian_affinity(-0.2, 1.0, 0.3, 1.5, alpha)) / (alpha * (1 - alpha))
        assert alpha_divergence(g, f, alpha) == pytest.approx(expected, abs=1e-9)

    def test_symmetrized_is_sum(self):
        g, f = pair(0.3, 1.5, -0.2, 1.0)
        total = alpha_divergence(g, f, 0.7) + alpha_divergence(f, g, 0.7)
        assert sym_alpha_divergence(g, f, 0.7) == pytest.approx(total, abs=1e-15)
        assert sym_alpha_divergence(g, f, 0.7) == pytest.approx(sym_alpha_divergence(f, g, 0.7), abs=1e-13)

    def test_alpha_tends_to_kl(self):
        g, f = pair(0.3, 1.5, -0.2, 1.0)
        kl = kl_divergence(g, f)
        assert alpha_divergence(g, f, 1.0 + 1e-5) == pytest.approx(kl, rel=1e-4)
        assert alpha_divergence(g, f, 1.0 - 1e-5) == pytest.approx(kl, rel=1e-4)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, math.inf])
    def test_bad_alpha(self, d1, alpha):
        with pytest.raises(DomainError):
            alpha_divergence(d1.f0, d1.f1, alpha)

    def test_affinity_domain(self, d1):
        with pytest.raises(DomainError):
            u_affinity(d1.f0, d1.f1, 1.5)
        assert u_affinity(d1.f0, d1.f1, 0.0) == pytest.approx(1.0)

    def test_grids_must_match(self, d1):
        other = make_nominal(Gaussian(0.0, 1.0), (-5.0, 5.0, 101))
        with pytest.raises(ParameterError):
            kl_divergence(d1.f0, other)

    def test_kl_support(self):
        g = GridDensity(0.0, 1.0, [1.0, 1.0, 1.0])
        f = GridDensity(0.0, 1.0, [1.0, 0.0, 1.0])
        with pytest.raises(DomainError):
            kl_divergence(g, f)

    def test_dispatch(self, d1):
        assert divergence(d1.f0, d1.f1, "kl") == kl_divergence(d1.f0, d1.f1)
        assert divergence(d1.f0, d1.f1, "alpha", 0.5) == alpha_divergence(d1.f0, d1.f1, 0.5)
        with pytest.raises(ParameterError):
            divergence(d1.f0, d1.f1, "tv")


class TestDivergenceBall:
    def test_contains(self, d1):
        ball = DivergenceBall("kl", 0.1, d1.f0)
        assert ball.contains(d1.f0)
        assert not ball.contains(d1.f1)
        assert ball.contains(d1.f1, slack=2.0)

    def test_validation(self, d1):
        with pytest.raises(ParameterError):
            DivergenceBall("alpha", 0.1, d1.f0)
        with pytest.raises(ParameterError):
            DivergenceBall("kl", -0.1, d1.f0)
        with pytest.raises(ParameterError):
            DivergenceBall("hellinger", 0.1, d1.f0)


class TestSampling:
    def test_matches_gaussian(self, d1):
        draws = sample(d1.f0, 20000, 7)
        assert stats.kstest(draws, stats.norm(-1.0, 1.0).cdf).pvalue > 1e-3

    def test_reproducible(self, d3):
        np.testing.assert_array_equal(sample(d3.f1, 100, 3), sample(d3.f1, 100, 3))

    def test_cdf_knots(self, d1):
        c = cdf_knots(d1.f0)
        assert c[0] == 0.0 and c[-1] == 1.0 and np.all(np.diff(c) >= 0)

    def test_bad_count(self, d1):
        with pytest.raises(ParameterError):
            sample(d1.f0, 0)


class TestCsv:
    def test_round_trip(self, d3, tmp_path):
        path = tmp_path / "f1.csv"
        write_csv(d3.f1, path, "made by a test\nsecond line")
        text = path.read_text().splitlines()
        assert text[:3] == ["# made by a test", "# second line", "y,value"]
        back = read_csv(path)
        assert back.grid == d3.f1.grid
        np.testing.assert_array_equal(back.values, d3.f1.values)


@st.composite
def gaussians(draw):
    m0 = draw(st.floats(-2, 2))
    m1 = draw(st.floats(-2, 2))
    v0 = draw(st.floats(0.3, 3))
    v1 = draw(st.floats(0.3, 3))
    return m0, v0, m1, v1


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(gaussians(), st.floats(0.01, 0.99))
    def test_affinity_closed_form(self, params, u):
        m0, v0, m1, v1 = params
        f0, f1 = pair(m0, v0, m1, v1, (-25.0, 25.0, 5001))
        assert u_affinity(f0, f1, u) == pytest.approx(gaussian_affinity(m0, v0, m1, v1, u), abs=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(gaussians(), st.sampled_from([0.1, 0.5, 2.0]))
    def test_divergences_nonnegative(self, params, alpha):
        f0, f1 = pair(*params, (-25.0, 25.0, 2001))
        assert kl_divergence(f0, f1) >= -1e-12
        assert alpha_divergence(f0, f1, alpha) >= -1e-12
        assert sym_alpha_divergence(f0, f1, alpha) >= -1e-12
        assert u_affinity(f0, f1, 0.5) <= 1.0 + 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-2, 2), st.floats(0.3, 3), st.sampled_from(["kl", "alpha", "symalpha"]))
    def test_divergence_vanishes_on_diagonal(self, m, v, kind):
        g = make_nominal(Gaussian(m, v), (-25.0, 25.0, 2001))
        assert abs(divergence(g, g, kind, None if kind == "kl" else 0.5)) <= 1e-14
