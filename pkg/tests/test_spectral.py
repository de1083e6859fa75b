import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustcp.spectral import (
    BudgetExceeded,
    KrankCertificate,
    SeparationFailure,
    check_kruskal_condition,
    find_separating_vector,
    nz_count,
    orthonormal_complement_residual,
    robust_krank,
    sigma_min,
    svd,
    top_r_subspace,
)
from robustcp.tensor_core import CPDecomposition

from oracles import brute_krank


class TestSVD:
    def test_sign_convention(self):
        m = np.array([[-3.0, 0.0], [0.0, -1.0]])
        s, u, vt = svd(m)
        np.testing.assert_allclose(s, [3.0, 1.0])
        assert np.all(u[np.argmax(np.abs(u), axis=0), [0, 1]] > 0)
        np.testing.assert_allclose(u @ np.diag(s) @ vt, m, atol=1e-15)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            svd(np.array([[np.nan]]))

    def test_sigma_min_of_wide_matrix(self):
        # singular values of [[1, 0, 0], [0, 2, 0]] are 2 and 1
        assert sigma_min(np.array([[1.0, 0, 0], [0, 2, 0]])) == pytest.approx(1.0)

    def test_top_subspace_residual(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((3, 9))
        s = np.linalg.svd(m, compute_uv=False)
        p = top_r_subspace(m, 1)
        assert p.residual(m) == pytest.approx(np.sqrt(np.sum(s[1:] ** 2)), rel=1e-12)

    def test_top_subspace_range(self):
        with pytest.raises(ValueError):
            top_r_subspace(np.eye(2), 3)

    def test_complement_residual(self):
        a = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        np.testing.assert_allclose(orthonormal_complement_residual(a, [0]), [0.0, 1.0, 1.0], atol=1e-15)


class TestRobustKrank:
    def test_identity(self):
        cert = robust_krank(np.eye(3), 1.0)
        assert cert.krank == 3 and cert.witness_columns == ()

    def test_duplicate_column(self):
        a = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        cert = robust_krank(a, 100.0)
        assert cert.krank == 1
        assert cert.witness_columns == (0, 2)
        assert cert.witness_sigma == pytest.approx(0.0, abs=1e-15)

    def test_zero_column(self):
        assert robust_krank(np.array([[1.0, 0.0], [0.0, 0.0]]), 10.0).krank == 0

    def test_more_columns_than_rows(self):
        # 4 generic columns in R^2: every pair independent, no triple can be
        assert robust_krank(np.array([[1.0, 0, 1, 1], [0, 1, 1, -1]]), 10.0).krank == 2

    def test_tau_threshold(self):
        # sigma_2 of [e1, (e1 + 0.1 e2)/norm] is about 0.0705
        a = np.array([[1.0, 1.0], [0.0, 0.1]])
        a /= np.linalg.norm(a, axis=0)
        assert robust_krank(a, 10.0).krank == 1
        assert robust_krank(a, 100.0).krank == 2

    @given(st.integers(0, 10**6), st.sampled_from([1.0, 10.0, 100.0]))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force(self, seed, tau):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((rng.integers(1, 6), rng.integers(1, 7))) * rng.uniform(0.05, 2)
        assert robust_krank(a, tau).krank == brute_krank(a, tau)

    @given(st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_tau(self, seed):
        a = np.random.default_rng(seed).standard_normal((4, 5)) * 0.3
        ks = [robust_krank(a, t).krank for t in (1.0, 3.0, 10.0, 100.0)]
        assert ks == sorted(ks)

    @given(st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((3, 5))
        assert robust_krank(a, 5.0).krank == robust_krank(a[:, rng.permutation(5)], 5.0).krank

    def test_budget(self):
        with pytest.raises(BudgetExceeded) as info:
            robust_krank(np.ones((2, 25)), 1.0, budget=1000)
        assert info.value.estimate == 2**25 - 1

    def test_certificate_round_trip(self):
        cert = KrankCertificate(10.0, 1, (0, 2), 0.0)
        assert KrankCertificate.from_dict(cert.to_dict()) == cert


class TestKruskalCondition:
    def test_identity_passes(self):
        rep = check_kruskal_condition(CPDecomposition([np.eye(3)] * 3), 1.0)
        assert rep.passed and rep.total == 9 and rep.required == 8

    def test_duplicate_fails(self):
        a = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0, 0, 0]])
        rep = check_kruskal_condition(CPDecomposition([a, np.eye(3), np.eye(3)]), 10.0)
        assert not rep.passed and rep.certificates[0].witness_columns == (0, 2)

    def test_per_mode_taus(self):
        rep = check_kruskal_condition(CPDecomposition([np.eye(2)] * 4), [1.0, 2.0, 3.0, 4.0])
        assert rep.taus == (1.0, 2.0, 3.0, 4.0) and rep.required == 7


class TestSeparation:
    def test_found_vector_separates(self):
        u = np.random.default_rng(0).standard_normal((6, 4))
        w = find_separating_vector(u, seed=3)
        eps = np.linalg.norm(u, axis=1).min()
        assert np.all(np.abs(u @ w) > eps / (20 * 4 * 6))
        assert np.linalg.norm(w) == pytest.approx(1.0)

    def test_failure_is_reported(self):
        with pytest.raises(SeparationFailure):
            find_separating_vector(np.eye(2), eps=1.0, max_attempts=0)

    def test_rejects_short_vectors(self):
        with pytest.raises(ValueError):
            find_separating_vector(np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestNzCount:
    def test_counts(self):
        assert nz_count([0.0, 1e-3, 2.0]) == 2
        assert nz_count([0.0, 1e-3, 2.0], 0.01) == 1
        with pytest.raises(ValueError):
            nz_count([1.0], -1)
