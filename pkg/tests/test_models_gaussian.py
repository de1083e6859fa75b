import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial.hermite_e import hermegauss

from robustcp.models import gaussian as gm
from robustcp.models._common import LearnerConfig


def _quadrature(n, deg=6):
    """Tensor-product Gauss-Hermite rule for N(0, I_n); exact for low-degree polynomials."""
    x, w = hermegauss(deg)
    w = w / math.sqrt(2 * math.pi)
    pts = np.array(list(itertools.product(x, repeat=n)))
    wts = np.array([math.prod(c) for c in itertools.product(w, repeat=n)])
    return pts, wts


def _weighted_moment(pts, wts, order):
    out = np.zeros((pts.shape[1],) * order)
    for p, w in zip(pts, wts):
        t = np.array(w)
        for _ in range(order):
            t = np.multiply.outer(t, p)
        out += t
    return out


def _mixture_raw_moments(params, order):
    """Exact raw moments by quadrature over every component."""
    pts, wts = _quadrature(params.n)
    raw = [np.array(1.0)]
    for ell in range(1, order + 1):
        m = 0.0
        for r in range(params.rank):
            m = m + params.weights[r] * _weighted_moment(params.means[:, r] + params.sigma * pts, wts, ell)
        raw.append(m)
    return raw


@pytest.fixture
def mixture():
    means = np.array([[0.6, -0.3], [0.2, 0.5], [-0.4, 0.1]])
    return gm.GaussianMixtureParams(np.array([0.35, 0.65]), means, 0.5)


class TestUnivariate:
    @pytest.mark.parametrize("s", range(9))
    def test_against_gauss_hermite(self, s):
        x, w = hermegauss(8)
        sigma = 0.7
        expected = np.sum(w * (sigma * x) ** s) / math.sqrt(2 * math.pi)
        assert gm.gaussian_univariate_moment(s, sigma) == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_known_values(self):
        assert gm.gaussian_univariate_moment(0, 2.0) == 1.0
        assert gm.gaussian_univariate_moment(2, 2.0) == 4.0
        assert gm.gaussian_univariate_moment(4, 2.0) == 48.0
        assert gm.gaussian_univariate_moment(3, 2.0) == 0.0
        with pytest.raises(ValueError):
            gm.gaussian_univariate_moment(-1, 1.0)


class TestNoiseTensor:
    @pytest.mark.parametrize("order", [0, 1, 2, 3, 4])
    def test_against_quadrature(self, order):
        pts, wts = _quadrature(2)
        sigma = 0.8
        expected = _weighted_moment(sigma * pts, wts, order)
        np.testing.assert_allclose(gm.gaussian_noise_tensor(order, sigma, 2), expected, atol=1e-12)

    def test_order_two_is_scaled_identity(self):
        np.testing.assert_allclose(gm.gaussian_noise_tensor(2, 0.3, 4), 0.09 * np.eye(4))

    def test_order_four_entries(self):
        t = gm.gaussian_noise_tensor(4, 1.0, 3)
        assert t[0, 0, 0, 0] == 3.0
        assert t[0, 0, 1, 1] == t[0, 1, 0, 1] == t[1, 0, 0, 1] == 1.0
        assert t[0, 0, 0, 1] == 0.0 and t[0, 1, 2, 2] == 0.0

    def test_exchangeable(self):
        t = gm.gaussian_noise_tensor(4, 0.6, 3)
        for perm in itertools.permutations(range(4)):
            np.testing.assert_array_equal(np.transpose(t, perm), t)

    def test_monte_carlo(self):
        rng = np.random.default_rng(0)
        e = 0.5 * rng.standard_normal((200_000, 2))
        np.testing.assert_allclose(gm.raw_moment(e, 4), gm.gaussian_noise_tensor(4, 0.5, 2), atol=0.01)


class TestMoments:
    def test_raw_moment_matches_einsum(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((100, 3))
        np.testing.assert_allclose(gm.raw_moment(x, 3), np.einsum("ka,kb,kc->abc", x, x, x) / 100)
        with pytest.raises(ValueError):
            gm.raw_moment(np.zeros((0, 3)), 2)

    def test_second_moment_identity(self, mixture):
        raw = _mixture_raw_moments(mixture, 2)
        moms = gm.population_moms(mixture, 2)
        np.testing.assert_allclose(raw[2], moms[2] + mixture.sigma**2 * np.eye(3), atol=1e-13)

    @pytest.mark.parametrize("order", [3, 4])
    def test_recursion_against_quadrature(self, mixture, order):
        moms = gm.mom_from_raw(_mixture_raw_moments(mixture, order), mixture.sigma)
        exact = gm.population_moms(mixture, order)
        for a, b in zip(moms[1:], exact[1:]):
            np.testing.assert_allclose(a, b, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0.1, 1.5))
    def test_mom_is_symmetric(self, seed, sigma):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((50, 3))
        m = gm.mom_tensor(x, 3, sigma)
        for perm in itertools.permutations(range(3)):
            np.testing.assert_allclose(np.transpose(m, perm), m, atol=1e-12)


class TestSigma:
    def test_estimate(self, mixture):
        x = gm.sample_gaussian_mixture(mixture, 200_000, seed=2)
        assert gm.estimate_sigma(x) == pytest.approx(0.5, rel=0.02)

    def test_degenerate_data(self):
        assert gm.estimate_sigma(np.ones((10, 3))) == 0.0
        with pytest.raises(ValueError):
            gm.estimate_sigma(np.ones((2, 3)))

    def test_grid(self):
        np.testing.assert_allclose(gm.sigma_grid(0.5, 0.1, 5), [0.3, 0.4, 0.5, 0.6, 0.7])
        assert np.all(gm.sigma_grid(0.1, 0.1, 5) > 0)

    def test_required_samples(self):
        n = gm.required_samples_gaussian(0.1, 3, 3, 0.5)
        k = (1 + 0.5 * 3 * math.log(3)) ** 3
        assert n == math.ceil(k * (3 * math.log(3) + math.log(20)) / 0.01)
        with pytest.raises(ValueError):
            gm.required_samples_gaussian(0.1, 3, 3, 0.0)


class TestLearning:
    def test_analytic_order_three(self, mixture):
        est, diag = gm.learn_gaussian_from_moments(gm.population_moms(mixture, 3), 2, 3, 0.5)
        assert diag["lower"] == "fit"
        assert gm.gaussian_error(mixture, est)["max"] <= 1e-3

    def test_analytic_order_four(self, mixture):
        est, diag = gm.learn_gaussian_from_moments(gm.population_moms(mixture, 4), 2, 4, 0.5)
        assert diag["lower"] == "decompose"
        assert gm.gaussian_error(mixture, est)["max"] <= 1e-3

    def test_order_four_fit(self, mixture):
        est, _ = gm.learn_gaussian_from_moments(gm.population_moms(mixture, 4), 2, 4, 0.5, lower="fit")
        assert gm.gaussian_error(mixture, est)["max"] <= 1e-3

    def test_single_component(self):
        p = gm.GaussianMixtureParams(np.ones(1), np.array([[0.3], [0.1]]), 1.0)
        est, _ = gm.learn_gaussian_from_moments(gm.population_moms(p, 3), 1, 3, 1.0)
        np.testing.assert_allclose(est.means, p.means)

    def test_from_samples(self, mixture):
        x = gm.sample_gaussian_mixture(mixture, 400_000, seed=3)
        est, diag = gm.learn_gaussian_mixture(x, 2, 3, sigma=0.5)
        err = gm.gaussian_error(mixture, est)
        assert err["means"] < 0.25 and err["weights"] < 0.15
        assert diag["sigma_candidates"] == [0.5]

    def test_sigma_grid_prefers_truth(self, mixture):
        moms_raw = _mixture_raw_moments(mixture, 3)
        fits = {}
        for s in (0.3, 0.5, 0.7):
            moms = gm.mom_from_raw(moms_raw, s)
            # a wrong sigma never meets the guarantee, so cap the search
            _, diag = gm.learn_gaussian_from_moments(moms, 2, 3, s, LearnerConfig(budget=20_000), 1e-6)
            fits[s] = diag["achieved_error"]
        assert min(fits, key=fits.get) == 0.5

    def test_unknown_lower_strategy(self, mixture):
        with pytest.raises(ValueError):
            gm.learn_gaussian_from_moments(gm.population_moms(mixture, 3), 2, 3, 0.5, lower="nope")
