import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustcp.experiments import planted_multiview
from robustcp.models import multiview as mv
from robustcp.models._common import LearnerConfig, match_columns
from robustcp.tensor_core import CPDecomposition


def _brute_population(params):
    # sum over components of w_r * outer products, written out term by term
    t = 0.0
    for r in range(params.rank):
        term = params.weights[r]
        for m in params.means:
            term = np.multiply.outer(term, m[:, r])
        t = t + term
    return t


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            mv.MultiViewParams(np.array([0.5, 0.6]), (np.eye(2),))
        with pytest.raises(ValueError):
            mv.MultiViewParams(np.array([0.5, 0.5]), (np.ones((2, 3)) / 2,))
        with pytest.raises(ValueError):
            mv.MultiViewParams(np.array([0.5, 0.5]), (np.array([[2.0, 0.0], [-1.0, 1.0]]),))

    def test_random_params_are_probabilities(self):
        p = mv.random_multiview_params(4, 3, 3, seed=1)
        assert p.rank == 3 and p.order == 3
        for m in p.means:
            np.testing.assert_allclose(m.sum(axis=0), 1.0)


class TestMoments:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3), st.integers(2, 4))
    def test_population_tensor_identity(self, seed, n, rank, order):
        p = mv.random_multiview_params(n, rank, order, seed=seed)
        np.testing.assert_allclose(mv.population_tensor(p), _brute_population(p), atol=1e-14)
        np.testing.assert_allclose(mv.population_tensor(p).sum(), 1.0)

    def test_one_sample_is_indicator(self):
        t = mv.estimate_moment_tensor(np.array([[1, 0, 2]]), dims=3)
        expected = np.zeros((3, 3, 3))
        expected[1, 0, 2] = 1.0
        np.testing.assert_array_equal(t, expected)

    def test_real_views_match_indicator_views(self):
        rng = np.random.default_rng(0)
        idx = rng.integers(0, 3, size=(50, 3))
        views = [np.eye(3)[idx[:, j]] for j in range(3)]
        np.testing.assert_allclose(mv.estimate_moment_tensor(views, 3),
                                   mv.estimate_moment_tensor(idx, 3, dims=3), atol=1e-15)

    def test_monte_carlo_error_scale(self):
        # E||T^ - T||_F^2 <= 1/N for indicator views
        p = mv.random_multiview_params(3, 2, 3, seed=2)
        exact = mv.population_tensor(p)
        errs = []
        for seed in range(20):
            x = mv.sample_multiview(p, 10_000, seed=seed)
            errs.append(np.linalg.norm(mv.estimate_moment_tensor(x, 3, dims=3) - exact))
        assert max(errs) <= mv.sampling_eps(10_000)
        assert np.mean(np.square(errs)) <= 1.0 / 10_000

    def test_sample_shape_and_range(self):
        p = mv.random_multiview_params(4, 2, 3, seed=3)
        x = mv.sample_multiview(p, 100, seed=0)
        assert x.shape == (100, 3)
        assert x.min() >= 0 and x.max() < 4
        np.testing.assert_array_equal(x, mv.sample_multiview(p, 100, seed=0))

    def test_bad_samples(self):
        with pytest.raises(ValueError):
            mv.estimate_moment_tensor(np.zeros((0, 3), dtype=int))
        with pytest.raises(ValueError):
            mv.estimate_moment_tensor(np.array([[0, 5]]), dims=3)
        with pytest.raises(ValueError):
            mv.estimate_moment_tensor(np.array([[0, 1]]), order=3)


class TestRequiredSamples:
    def test_formula_value(self):
        expected = 8 * 4 * math.sqrt(2 * math.log(2)) / 0.01
        assert mv.required_samples_multiview(0.1, 2, 2) == math.ceil(expected)

    def test_monotone(self):
        assert mv.required_samples_multiview(0.05, 3, 3) > mv.required_samples_multiview(0.1, 3, 3)
        assert mv.required_samples_multiview(0.1, 3, 4) > mv.required_samples_multiview(0.1, 3, 3)

    def test_invalid_and_overflow(self):
        with pytest.raises(ValueError):
            mv.required_samples_multiview(0.0, 3, 3)
        with pytest.raises(OverflowError):
            mv.required_samples_multiview(1e-12, 8, 10**4)


class TestRecovery:
    def test_exact_population(self):
        p = planted_multiview(0)
        est, diag = mv.learn_multiview_from_tensor(mv.population_tensor(p), 2)
        err = mv.parameter_error(p, est)
        assert err["max"] <= 1e-3
        np.testing.assert_allclose(est.weights.sum(), 1.0)

    def test_single_component(self):
        p = mv.random_multiview_params(3, 1, 3, seed=4)
        est, _ = mv.learn_multiview_from_tensor(mv.population_tensor(p), 1)
        assert mv.parameter_error(p, est)["max"] <= 1e-6
        np.testing.assert_allclose(est.weights, [1.0])

    def test_params_from_decomposition_undoes_scaling(self):
        p = mv.random_multiview_params(3, 2, 3, seed=5)
        mats = list(p.means)
        mats[-1] = mats[-1] * p.weights
        lam = np.array([[-2.0, 0.5], [-0.25, 3.0], [2.0, 1 / 1.5]])
        scaled = CPDecomposition([m * l for m, l in zip(mats, lam)])
        est, _ = mv.params_from_decomposition(scaled)
        for a, b in zip(p.means, est.means):
            np.testing.assert_allclose(a, b, atol=1e-12)
        np.testing.assert_allclose(est.weights, p.weights, atol=1e-12)

    def test_sampled_recovery(self):
        p = planted_multiview(1)
        x = mv.sample_multiview(p, 100_000, seed=7)
        est, diag = mv.learn_multiview(x, 2, 3, dims=3)
        assert mv.parameter_error(p, est)["max"] <= 0.05
        assert diag["target_eps"] == pytest.approx(mv.sampling_eps(100_000))

    def test_topic_model(self):
        topics = np.array([[0.7, 0.1], [0.2, 0.1], [0.1, 0.8]])
        p = mv.topic_params([0.4, 0.6], topics, 3)
        x = mv.sample_multiview(p, 100_000, seed=3)
        est, _ = mv.learn_topic(x, 2, 3, dims=3)
        perm = match_columns([topics], [est.means[0]])
        np.testing.assert_allclose(est.means[0][:, np.argsort(perm)], topics, atol=0.05)
        assert all(m is est.means[0] for m in est.means)


def test_match_columns_inverse_convention():
    rng = np.random.default_rng(0)
    ref = rng.random((3, 4))
    perm = np.array([2, 0, 3, 1])
    p = match_columns([ref], [ref[:, perm]])
    np.testing.assert_array_equal(p, perm)
    np.testing.assert_array_equal(ref[:, perm][:, np.argsort(p)], ref)


def test_learner_config_rho_default():
    cfg = LearnerConfig().net_config(2, 0.1)
    assert cfg.rho == 1.0 and cfg.rank == 2
    assert LearnerConfig(rho=3.0).net_config(2, 0.1).rho == 3.0
