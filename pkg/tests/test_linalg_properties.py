"""Randomized checks of the auxiliary linear-algebra properties (>= 100 trials each)."""
import math

import numpy as np
import pytest

import oracles


def _assert_clean(report, min_trials=100):
    assert report["trials"] >= min_trials
    assert report["violations"] == []


class TestProductSingularValues:
    def test_inequality(self):
        rep = oracles.check_product_singular_values()
        _assert_clean(rep)
        assert rep["inequalities"] > 300


class TestSmallCombination:
    def test_coefficients_bounded(self):
        _assert_clean(oracles.check_small_combination())


class TestCloseColumns:
    def test_random_subspace(self):
        _assert_clean(oracles.check_few_close_columns())

    def test_best_fit_subspace(self):
        _assert_clean(oracles.check_few_close_columns_adversarial())

    def test_sqrt_l_constant_is_not_enough(self):
        # two columns both within 1/tau of a line while sigma_2 = sqrt(2) a >= 1/tau:
        # two close columns for l = 1, so the sharp threshold is 1/(tau sqrt(l + 1))
        tau, a = 10.0, 0.09
        cols = np.array([[1.0, 1.0], [a, -a]])
        cols /= np.linalg.norm(cols, axis=0)
        assert oracles.robust_krank(cols, tau).krank == 2
        dist = np.abs(cols[1])
        assert np.all(dist <= 1 / tau)
        assert np.all(dist >= 1 / (tau * math.sqrt(2)))

    def test_far_from_span(self):
        _assert_clean(oracles.check_far_from_span())


class TestSeparatingVector:
    def test_found_vector_separates(self):
        rep = oracles.check_separating_vector()
        _assert_clean(rep)
        assert rep["single_draw_rate"] >= 0.25


class TestKhatriRao:
    def test_krank_lower_bound(self):
        _assert_clean(oracles.check_khatri_rao_krank(), min_trials=50)

    @pytest.mark.parametrize("n", [2, 3])
    def test_tightness(self, n):
        rep = oracles.khatri_rao_tightness(n)
        assert rep["krank_a"] == n
        assert rep["dependency"] < 1e-12
        assert all(k <= 2 * n - 1 for k in rep["krank_kr"].values())
        assert rep["krank_kr"][1e6] == 2 * n - 1


class TestTensoring:
    def test_direct_perturbation(self):
        _assert_clean(oracles.check_tensoring())

    def test_through_rank_one_split(self):
        _assert_clean(oracles.check_tensoring(seed=10, use_split=True))


class TestL1Error:
    def test_bound(self):
        _assert_clean(oracles.check_l1_error())


def test_krank_oracle_agreement():
    _assert_clean(oracles.check_krank_oracle())
