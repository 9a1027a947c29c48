import json
import math

import numpy as np
import pytest

from nystrom_landmarks import (
    DomainError,
    KernelSpec,
    LandmarkSet,
    check_lemma4,
    das_bound,
    das_sample,
    effective_dimension,
    kernel_matrix,
    oversampling_lower_bound,
    projector_kernel,
    ras_effective_dimension,
    ras_guarantee_trial,
    ras_sample,
    residual_diagonal,
    rls_sample,
    standardize,
    uniform_sample,
)
from nystrom_landmarks.datasets import make_blobs
from nystrom_landmarks.samplers import OVERSAMPLING_FLOOR, lambert_argument, ras_score_reference

from conftest import random_instance


@pytest.fixture(scope="module")
def blobs30():
    X, _ = make_blobs(30, 0)
    K = kernel_matrix(KernelSpec("gaussian", 1.0), standardize(X))
    return K, projector_kernel(K, 1e-2)


@pytest.fixture(scope="module")
def blobs60():
    X, _ = make_blobs(60, 0)
    K = kernel_matrix(KernelSpec("gaussian", 1.0), standardize(X))
    return K, projector_kernel(K, 1e-2)


def naive_das(P, k):
    chosen = []
    for _ in range(k):
        r = residual_diagonal(P, chosen)
        r[chosen] = -np.inf
        chosen.append(int(np.argmax(r)))
    return chosen


def bisect_oversampling(y, lo=28.0 / 3.0, hi=1e6, iters=200):
    """Root of (3c/28) exp(-3c/28) = -y on the decreasing side c >= 28/3."""
    f = lambda c: 3 * c / 28 * math.exp(-3 * c / 28) + y
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


class TestDas:
    def test_frozen_sequence(self, blobs30):
        _, P = blobs30
        trace = das_sample(P, 6)
        assert trace.landmarks.indices.tolist() == [29, 28, 27, 25, 20, 23]
        assert trace.residual_max[0] == pytest.approx(0.7363905944757435, rel=1e-10)
        assert trace.residual_max[6] == pytest.approx(0.24248598635516147, rel=1e-10)

    def test_matches_naive_recompute(self, blobs30):
        _, P = blobs30
        assert das_sample(P, 20).landmarks.indices.tolist() == naive_das(P, 20)

    def test_monotone_and_bounded(self, blobs30):
        _, P = blobs30
        trace = das_sample(P, 29)
        assert np.all(np.diff(trace.residual_max) <= 1e-12)
        ms = np.arange(2, 29)
        assert np.all(trace.bounds[ms] >= trace.residual_max[ms])
        assert np.isnan(trace.bounds[:2]).all()

    def test_tie_break_lowest_index(self):
        P = projector_kernel(np.eye(5), 0.1)
        assert das_sample(P, 3).landmarks.indices.tolist() == [0, 1, 2]

    def test_bound_domain(self, blobs30):
        _, P = blobs30
        for m in (1, 30):
            with pytest.raises(DomainError):
                das_bound(P, m)

    def test_k_validation(self, blobs30):
        _, P = blobs30
        with pytest.raises(ValueError):
            das_sample(P, 0)

    def test_to_dict(self, blobs30):
        d = das_sample(blobs30[1], 3).to_dict()
        assert d["bounds"][0] is None and len(d["residual_max"]) == 4
        json.dumps(d)


class TestRas:
    def test_frozen_selection(self, blobs30):
        _, P = blobs30
        trace = ras_sample(P, 0.1, 2.0, 0.5, 7)
        assert trace.landmarks.indices.tolist() == [
            0, 1, 2, 3, 4, 6, 7, 9, 10, 11, 12, 13, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29
        ]

    def test_scores_match_reference(self, blobs30):
        _, P = blobs30
        eps = 0.1
        trace = ras_sample(P, eps, 1.0, 0.5, 3)
        for i in range(P.n):
            before = trace.accepted[:i]
            lm = LandmarkSet(np.flatnonzero(before), trace.probabilities[:i][before])
            assert trace.scores[i] == pytest.approx(ras_score_reference(P, lm, i, eps), rel=1e-9, abs=1e-12)

    def test_probability_formula(self, blobs30):
        _, P = blobs30
        t, c = 0.5, 1.5
        trace = ras_sample(P, 0.2, c, t, 1)
        np.testing.assert_allclose(trace.clipped, np.minimum(1.0, (1 + t) * trace.scores))
        np.testing.assert_allclose(trace.probabilities, np.minimum(1.0, c * trace.clipped))
        np.testing.assert_allclose(trace.landmarks.probabilities, trace.probabilities[trace.accepted])

    def test_first_acceptance_frequency(self, blobs30):
        # Index 0 is scored against an empty set, so its acceptance is a Bernoulli(p0) draw.
        _, P = blobs30
        eps, c, t = 0.5, 0.1, 0.5
        p0 = min(1.0, c * min(1.0, (1 + t) * P.entries[0, 0] / eps))
        hits = np.mean([ras_sample(P, eps, c, t, s).accepted[0] for s in range(2000)])
        assert abs(hits - p0) < 4 * math.sqrt(p0 * (1 - p0) / 2000)

    def test_deterministic_and_json(self, blobs30):
        _, P = blobs30
        a = ras_sample(P, 0.1, 1.0, 0.5, 11)
        b = ras_sample(P, 0.1, 1.0, 0.5, 11)
        assert a.to_json() == b.to_json()
        assert json.loads(a.to_json())["params"]["seed"] == 11

    @pytest.mark.parametrize("eps,c", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)])
    def test_parameter_validation(self, blobs30, eps, c):
        with pytest.raises(ValueError):
            ras_sample(blobs30[1], eps, c)


class TestOversampling:
    def test_frozen(self):
        assert oversampling_lower_bound(0.5, 0.2, 10.0) == pytest.approx(106.3246918038695, rel=1e-12)

    def test_against_bisection(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            eps, delta, d = rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99), 10 ** rng.uniform(-1, 4)
            y = lambert_argument(eps, delta, d)
            if y < -math.exp(-1.0):
                continue
            assert oversampling_lower_bound(eps, delta, d) == pytest.approx(bisect_oversampling(y), rel=1e-9)

    def test_floor_when_vacuous(self):
        assert lambert_argument(0.5, 0.2, 1e-3) < -math.exp(-1.0)
        assert oversampling_lower_bound(0.5, 0.2, 1e-3) == OVERSAMPLING_FLOOR

    @pytest.mark.parametrize("args", [(0.0, 0.2, 1.0), (0.5, 1.0, 1.0), (0.5, 0.2, 0.0), (0.5, 0.2, float("inf"))])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            oversampling_lower_bound(*args)

    def test_effective_dimension_regularization(self, blobs30):
        K, _ = blobs30
        eps, gamma = 0.5, 1e-2
        P_eps = projector_kernel(K, eps * gamma / (1 + eps))
        assert ras_effective_dimension(K, gamma, eps) == pytest.approx(effective_dimension(P_eps), rel=1e-12)


class TestBaselines:
    def test_uniform(self):
        a = uniform_sample(50, 10, 3)
        assert len(set(a.indices.tolist())) == 10
        assert a.indices.tolist() == uniform_sample(50, 10, 3).indices.tolist()
        with pytest.raises(ValueError):
            uniform_sample(5, 6, 0)

    def test_rls_first_draw_frequency(self, blobs30):
        _, P = blobs30
        lev = P.diagonal() / P.diagonal().sum()
        counts = np.bincount([rls_sample(P, 1, s).indices[0] for s in range(4000)], minlength=P.n)
        assert np.max(np.abs(counts / 4000 - lev)) < 4 * math.sqrt(lev.max() / 4000)

    def test_rls_distinct(self, blobs30):
        lm = rls_sample(blobs30[1], 30, 0)
        assert sorted(lm.indices.tolist()) == list(range(30))


class TestGuarantee:
    def test_scaled_kernel_gap(self, blobs60):
        K, P = blobs60
        eps, t = 0.5, 0.5
        for seed in range(5):
            lm = ras_sample(P, eps, 2.0, t, seed).landmarks
            report = check_lemma4(P, K, lm, eps, t)
            assert report.passed
            if report.premise:
                assert report.min_eigenvalue >= -report.tolerance

    def test_premise_not_met(self, blobs60):
        K, P = blobs60
        report = check_lemma4(P, K, [], 0.5, 0.1)
        assert not report.premise and report.passed and report.min_eigenvalue is None

    def test_t_domain(self, blobs60):
        K, P = blobs60
        with pytest.raises(DomainError):
            check_lemma4(P, K, [], 0.5, 0.7)

    def test_subsampling_regime(self, blobs60):
        # With c = 2 RAS keeps under half the points and still meets the error bound;
        # c = 0.5 undersamples and fails most of the time.
        K, P = blobs60
        good = [ras_guarantee_trial(K, P, 0.5, 2.0, 0.5, s) for s in range(100)]
        assert np.mean([g.success for g in good]) >= 0.8
        assert np.mean([g.num_landmarks for g in good]) < 30
        bad = [ras_guarantee_trial(K, P, 0.5, 0.5, 0.5, s) for s in range(100)]
        assert np.mean([b.success for b in bad]) < 0.5
