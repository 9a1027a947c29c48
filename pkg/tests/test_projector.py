import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nystrom_landmarks import (
    IncrementalNystrom,
    KernelSpec,
    LandmarkSet,
    SingularMatrixError,
    check_corollary1,
    check_lemma1,
    check_lemma2,
    check_lemma3,
    effective_dimension,
    error_frobenius_subsets,
    error_max_norm,
    error_operator_norm,
    kernel_matrix,
    leverage_scores,
    nystrom,
    projector_kernel,
    regularized_residual,
    residual_diagonal,
    smoothing_kernel,
)
from nystrom_landmarks.projector import jittered_cholesky

from conftest import random_instance


def power_iteration_norm(A, iters=2000, seed=0):
    """Spectral norm of a symmetric matrix by power iteration on A^2."""
    v = np.random.default_rng(seed).normal(size=A.shape[0])
    for _ in range(iters):
        v = A @ (A @ v)
        v /= np.linalg.norm(v)
    return float(np.sqrt(v @ A @ (A @ v)))


class TestProjector:
    def test_matches_direct_solve(self, small_instance):
        _, K, P = small_instance
        n = K.n
        direct = np.linalg.solve(K.entries + n * 1e-2 * np.eye(n), K.entries).T
        np.testing.assert_allclose(P.entries, direct, atol=1e-12)

    def test_factor_reproduces_projector(self, small_instance):
        _, _, P = small_instance
        np.testing.assert_allclose(P.factor.T @ P.factor, P.entries, atol=1e-13)

    def test_two_point_closed_form(self):
        # K = [[1, a], [a, 1]] has eigenpairs (1 +- a, [1, +-1]/sqrt 2).
        a, gamma = 0.6, 0.25
        K = np.array([[1.0, a], [a, 1.0]])
        P = projector_kernel(K, gamma)
        reg = 2 * gamma
        hi, lo = (1 + a) / (1 + a + reg), (1 - a) / (1 - a + reg)
        np.testing.assert_allclose(P.entries, 0.5 * np.array([[hi + lo, hi - lo], [hi - lo, hi + lo]]), rtol=1e-14)

    def test_leverage_loop_and_trace(self, small_instance):
        _, K, P = small_instance
        n = K.n
        M = np.linalg.inv(K.entries + n * 1e-2 * np.eye(n))
        loop = [K.entries[i] @ M[:, i] for i in range(n)]
        np.testing.assert_allclose(leverage_scores(P), loop, rtol=1e-11)
        assert effective_dimension(P) == pytest.approx(sum(loop), rel=1e-12)

    def test_rejects_nonpositive_gamma(self, small_instance):
        with pytest.raises(ValueError):
            projector_kernel(small_instance[1], 0.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 25), st.integers(0, 10_000), st.floats(1e-6, 10.0))
    def test_spectrum_in_unit_interval(self, n, seed, gamma):
        _, K, P = random_instance(n, seed, gamma)
        ev = np.linalg.eigvalsh(P.entries)
        assert ev[0] > -1e-12 and ev[-1] < 1.0
        assert 0.0 < effective_dimension(P) < n
        assert np.all(np.diff(P.spectrum) <= 1e-15)


class TestLandmarkSet:
    def test_sampling_matrix(self):
        lm = LandmarkSet([2, 0], [0.25, 1.0])
        S = lm.sampling_matrix(3)
        np.testing.assert_array_equal(S, [[0, 1], [0, 0], [2, 0]])
        assert lm.unweighted().probabilities is None

    def test_rejects_duplicates_and_bad_probabilities(self):
        with pytest.raises(ValueError):
            LandmarkSet([1, 1])
        with pytest.raises(ValueError):
            LandmarkSet([1], [0.0])


class TestNystrom:
    def test_matches_explicit_formula(self, small_instance):
        _, K, _ = small_instance
        lm = LandmarkSet([3, 7, 11], [0.5, 0.9, 0.2])
        S = lm.sampling_matrix(K.n)
        A = K.entries
        mu = 1e-3
        explicit = A @ S @ np.linalg.solve(S.T @ A @ S + mu * np.eye(3), S.T @ A)
        np.testing.assert_allclose(nystrom(K, lm, mu).dense(), explicit, atol=1e-12)

    def test_interpolates_landmark_columns(self, small_instance):
        _, K, _ = small_instance
        idx = [0, 4, 9]
        approx = nystrom(K, idx).dense()
        np.testing.assert_allclose(approx[:, idx], K.entries[:, idx], atol=1e-10)

    def test_empty_landmarks(self, small_instance):
        _, K, _ = small_instance
        assert np.all(nystrom(K, []).dense() == 0.0)

    def test_singular_core_without_mu(self):
        A = np.ones((3, 3))
        with pytest.raises(SingularMatrixError, match="mu > 0"):
            nystrom(A, [0, 1], 0.0)
        # a positive mu stabilizes the same core
        assert np.isfinite(nystrom(A, [0, 1], 1e-12).dense()).all()

    def test_incremental_matches_scratch(self, small_instance):
        _, K, P = small_instance
        rng = np.random.default_rng(5)
        idx = rng.choice(K.n, size=8, replace=False)
        w = 1.0 / np.sqrt(rng.uniform(0.1, 1.0, size=8))
        inc = IncrementalNystrom(P, mu=1e-2, capacity=2)
        for j, wj in zip(idx, w):
            inc.add(j, wj)
        lm = LandmarkSet(idx, 1.0 / w**2)
        np.testing.assert_allclose(inc.residual, np.diag(regularized_residual(P, lm, 1e-2)), atol=1e-13)
        S = lm.sampling_matrix(K.n)
        core = S.T @ P.entries @ S + 1e-2 * np.eye(8)
        np.testing.assert_allclose(inc.core_factor @ inc.core_factor.T, core, atol=1e-13)


class TestResidual:
    def test_residual_diagonal_explicit(self, small_instance):
        _, _, P = small_instance
        C = [1, 5, 8]
        Pd = P.entries
        explicit = Pd - Pd[:, C] @ np.linalg.solve(Pd[np.ix_(C, C)], Pd[C])
        np.testing.assert_allclose(residual_diagonal(P, C), np.diag(explicit), atol=1e-11)
        np.testing.assert_allclose(residual_diagonal(P, C)[C], 0.0, atol=1e-10)

    def test_diagonal_shrinks_with_more_landmarks(self, small_instance):
        _, _, P = small_instance
        r1 = residual_diagonal(P, [2])
        r2 = residual_diagonal(P, [2, 13])
        assert np.all(r2 <= r1 + 1e-14)

    def test_max_norm_on_diagonal(self, small_instance):
        _, _, P = small_instance
        for C in ([0], [3, 4, 10], list(range(0, 20, 3))):
            assert check_corollary1(P, C) <= 1e-10


class TestErrorMetrics:
    def test_operator_norm_vs_power_iteration(self, small_instance):
        _, K, _ = small_instance
        approx = nystrom(K, [0, 2, 4, 6])
        E = K.entries - approx.dense()
        expected = power_iteration_norm(E) / power_iteration_norm(K.entries)
        assert error_operator_norm(K, approx) == pytest.approx(expected, rel=1e-8)

    def test_max_norm_loop(self, small_instance):
        _, K, _ = small_instance
        approx = nystrom(K, [1, 3])
        D = approx.dense()
        loop = max(abs(K.entries[i, j] - D[i, j]) for i in range(K.n) for j in range(K.n))
        assert error_max_norm(K, approx) == loop

    def test_frobenius_subsets(self, small_instance):
        data, K, _ = small_instance
        spec = KernelSpec("gaussian", 1.0)
        approx = nystrom(K, [1, 3, 5])
        errs = error_frobenius_subsets(spec, data, approx, 20, 2, rng_seed=0)
        full = np.linalg.norm(K.entries - approx.dense(), "fro")
        np.testing.assert_allclose(errs, full, rtol=1e-12)
        again = error_frobenius_subsets(spec, data, approx, 5, 4, rng_seed=1)
        np.testing.assert_array_equal(again, error_frobenius_subsets(spec, data, approx, 5, 4, rng_seed=1))
        assert np.all(again <= full + 1e-12)


class TestIdentities:
    @pytest.mark.parametrize("eps", [1e-2, 1e-6])
    def test_score_identity(self, eps):
        _, _, P = random_instance(30, 1)
        lm = LandmarkSet([0, 4, 9, 17], [0.3, 1.0, 0.5, 0.8])
        assert check_lemma2(P, lm, eps) <= 1e-9

    @pytest.mark.parametrize("eps", [1e-2, 1e-6, 0.5])
    def test_projector_composition(self, eps):
        _, K, _ = random_instance(30, 2)
        assert check_lemma3(K, 1e-2, eps) <= 1e-10

    def test_kernel_gap_dominated_by_projector_gap(self):
        _, K, P = random_instance(20, 3)
        report = check_lemma1(K, P, [0, 5, 11], 1e-3)
        assert report.passed
        assert report.tolerance == pytest.approx(1e-8 * K.spectrum()[0])


class TestJitter:
    def test_positive_definite_untouched(self):
        M = np.array([[4.0, 2.0], [2.0, 3.0]])
        np.testing.assert_allclose(jittered_cholesky(M), np.linalg.cholesky(M))

    def test_semidefinite_gets_jitter(self):
        L = jittered_cholesky(np.ones((3, 3)))
        np.testing.assert_allclose(L @ L.T, np.ones((3, 3)), atol=1e-8)

    def test_indefinite_raises(self):
        with pytest.raises(SingularMatrixError):
            jittered_cholesky(np.diag([1.0, -1.0]))

    def test_smoothing_needs_positive_reg(self):
        with pytest.raises(ValueError):
            smoothing_kernel(np.eye(2), 0.0)
