"""Landmark samplers: deterministic and randomized adaptive sampling plus baselines."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .lambertw import BRANCH_POINT, lambertw_m1
from .projector import (
    IncrementalNystrom,
    LandmarkSet,
    ProjectorKernel,
    _dense,
    _opnorm_sym,
    as_landmarks,
    nystrom,
    smoothing_kernel,
)


def _check_k(n: int, k: int):
    if not 0 <= k <= n:
        raise ValueError(f"cannot select k={k} landmarks out of n={n}")


# ---------------------------------------------------------------------------
# Deterministic adaptive sampling
# ---------------------------------------------------------------------------


@dataclass
class DasTrace:
    """Output of :func:`das_sample`.

    ``residual_max[m]`` is the largest diagonal entry of the projector residual
    once the first ``m`` landmarks are selected (``m = 0..k``); ``bounds[m]`` is
    the matching convergence bound, NaN where it is undefined (``m < 2`` or ``m >= n``).
    """

    landmarks: LandmarkSet
    residual_max: np.ndarray
    bounds: np.ndarray

    def to_dict(self) -> dict:
        return {
            "indices": self.landmarks.indices.tolist(),
            "residual_max": self.residual_max.tolist(),
            "bounds": [None if math.isnan(b) else b for b in self.bounds.tolist()],
        }


def das_bound(P: ProjectorKernel, m: int) -> float:
    """Upper bound ``2 |P|_max sqrt(Lambda_{floor(m/2)+1})`` on the residual max-norm after ``m`` steps."""
    n = P.n
    if not 2 <= m < n:
        raise DomainError(f"the DAS bound needs 2 <= m < n (m={m}, n={n})")
    return 2.0 * float(np.max(np.abs(P.entries))) * math.sqrt(max(P.spectrum[m // 2], 0.0))


def das_sample(P: ProjectorKernel, k: int) -> DasTrace:
    """Greedily pick the maximizer of the projector residual diagonal ``k`` times.

    Ties go to the lowest index.
    """
    n = P.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    inc = IncrementalNystrom(P, mu=0.0, capacity=k)
    residual_max = np.empty(k + 1)
    for m in range(k):
        r = inc.residual.copy()
        r[inc.indices] = -np.inf
        j = int(np.argmax(r))
        residual_max[m] = r[j]
        inc.add(j)
    rest = np.delete(inc.residual, inc.indices)
    residual_max[k] = float(np.max(rest)) if rest.size else 0.0
    bounds = np.array([das_bound(P, m) if 2 <= m < n else np.nan for m in range(k + 1)])
    return DasTrace(LandmarkSet(np.array(inc.indices)), residual_max, bounds)


# ---------------------------------------------------------------------------
# Randomized adaptive sampling
# ---------------------------------------------------------------------------


@dataclass
class RasTrace:
    landmarks: LandmarkSet
    scores: np.ndarray
    clipped: np.ndarray
    probabilities: np.ndarray
    accepted: np.ndarray
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "indices": self.landmarks.indices.tolist(),
            "landmark_probabilities": self.landmarks.probabilities.tolist(),
            "scores": self.scores.tolist(),
            "clipped_scores": self.clipped.tolist(),
            "probabilities": self.probabilities.tolist(),
            "accepted": self.accepted.astype(int).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _ExactScorer:
    """Scores ``(1/eps)[P - L_{eps,S}(P)]_ii`` from an incrementally grown Cholesky core."""

    def __init__(self, P, eps: float):
        self.eps = eps
        self.state = IncrementalNystrom(P, mu=eps, capacity=64)

    @property
    def n(self) -> int:
        return self.state.source.n

    def score(self, i: int) -> float:
        return max(float(self.state.residual[i]), 0.0) / self.eps

    def accept(self, i: int, p: float):
        self.state.add(i, 1.0 / math.sqrt(p))


def _check_ras_params(epsilon: float, c: float):
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not c > 0:
        raise ValueError(f"oversampling factor must be positive, got {c}")


def run_ras(scorer, epsilon: float, c: float, t: float, rng_seed) -> RasTrace:
    """Single pass over the points in dataset order, shared by the exact and approximate paths.

    One uniform variate is drawn per visited index, so two scorers that agree on
    the probabilities make identical decisions for the same seed.
    """
    _check_ras_params(epsilon, c)
    n = scorer.n
    u = np.random.default_rng(rng_seed).random(n)
    scores = np.empty(n)
    clipped = np.empty(n)
    probs = np.empty(n)
    accepted = np.zeros(n, dtype=bool)
    for i in range(n):
        s = scorer.score(i)
        l_tilde = min(1.0, (1.0 + t) * s)
        p = min(1.0, c * l_tilde)
        scores[i], clipped[i], probs[i] = s, l_tilde, p
        if p > 0.0 and u[i] < p:
            accepted[i] = True
            scorer.accept(i, p)
    idx = np.flatnonzero(accepted)
    params = {"epsilon": epsilon, "c": c, "t": t, "seed": rng_seed}
    return RasTrace(LandmarkSet(idx, probs[idx]), scores, clipped, probs, accepted, params)


def ras_sample(P: ProjectorKernel, epsilon: float, c: float, t: float = 0.5, rng_seed=None) -> RasTrace:
    return run_ras(_ExactScorer(P, epsilon), epsilon, c, t, rng_seed)


def ras_score_reference(P: ProjectorKernel, landmarks, i: int, epsilon: float) -> float:
    """From-scratch score ``b_i^T (B S S^T B^T + eps I)^{-1} b_i``."""
    B = P.factor
    S = as_landmarks(landmarks).sampling_matrix(P.n)
    BS = B @ S
    M = BS @ BS.T + epsilon * np.eye(B.shape[0])
    b = B[:, i]
    return float(b @ np.linalg.solve(M, b))


# ---------------------------------------------------------------------------
# Oversampling bound
# ---------------------------------------------------------------------------

OVERSAMPLING_FLOOR = (1.0 + math.sqrt(37.0)) / 3.0


def lambert_argument(epsilon: float, delta: float, d_eff: float) -> float:
    return -3.0 * (1.0 + epsilon) * delta / (700.0 * d_eff)


def oversampling_lower_bound(epsilon: float, delta: float, d_eff: float) -> float:
    """Smallest oversampling factor ``c`` covered by the high-probability guarantee of RAS.

    ``max(-(28/3) W_-1(-3(1+eps) delta / (700 d_eff)), (1 + sqrt(37)) / 3)``, where
    ``d_eff`` is the effective dimension at regularization ``eps n gamma / (1 + eps)``.
    When the argument is below ``-1/e`` the failure-probability condition holds for
    every ``c`` and only the floor remains.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not (math.isfinite(d_eff) and d_eff > 0.0):
        raise DomainError(f"d_eff must be positive, got {d_eff}")
    y = lambert_argument(epsilon, delta, d_eff)
    if y < BRANCH_POINT:
        return OVERSAMPLING_FLOOR
    return max(-28.0 / 3.0 * lambertw_m1(y), OVERSAMPLING_FLOOR)


def ras_effective_dimension(K, gamma: float, epsilon: float) -> float:
    """``d_eff`` at regularization ``eps n gamma / (1 + eps)``, as used by the oversampling bound."""
    Kd = _dense(K)
    n = Kd.shape[0]
    return float(np.trace(smoothing_kernel(Kd, epsilon * n * gamma / (1.0 + epsilon)).entries))


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def uniform_sample(n: int, k: int, rng_seed=None) -> LandmarkSet:
    _check_k(n, k)
    rng = np.random.default_rng(rng_seed)
    return LandmarkSet(rng.choice(n, size=k, replace=False))


def rls_sample(P: ProjectorKernel, k: int, rng_seed=None) -> LandmarkSet:
    """Draw ``k`` distinct indices by successive leverage-proportional draws."""
    n = P.n
    _check_k(n, k)
    scores = np.clip(P.diagonal(), 0.0, None)
    rng = np.random.default_rng(rng_seed)
    # Generator.choice without replacement renormalizes over the remaining indices after each draw.
    return LandmarkSet(rng.choice(n, size=k, replace=False, p=scores / scores.sum()))


# ---------------------------------------------------------------------------
# Kernel approximation checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lemma4Report:
    lambda_max: float
    t: float
    premise: bool
    min_eigenvalue: float | None
    tolerance: float

    @property
    def passed(self) -> bool:
        return not self.premise or self.min_eigenvalue >= -self.tolerance

    def to_dict(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "t": self.t,
            "premise": self.premise,
            "min_eigenvalue": self.min_eigenvalue,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def psi_factor(P: ProjectorKernel, epsilon: float) -> np.ndarray:
    """``Psi = (B B^T + eps I)^{-1/2} B``; ``B B^T`` is diagonal for the spectral factor."""
    return np.sqrt(P.spectrum / (P.spectrum + epsilon))[:, None] * P.eigvecs.T


def check_lemma4(P: ProjectorKernel, K, landmarks, epsilon: float, t: float = 0.5) -> Lemma4Report:
    if not 0.0 < t < 1.0 / (1.0 + epsilon):
        raise DomainError(f"t must lie in (0, 1/(1+eps)), got {t}")
    Kd = _dense(K)
    lm = as_landmarks(landmarks)
    Psi = psi_factor(P, epsilon)
    PsiS = Psi @ lm.sampling_matrix(P.n)
    D = Psi @ Psi.T - PsiS @ PsiS.T
    lam = float(np.linalg.eigvalsh(0.5 * (D + D.T))[-1])
    lam_max_k = float(P.base_spectrum[0])
    tol = 1e-8 * lam_max_k
    if lam > t:
        return Lemma4Report(lam, t, False, None, tol)
    n = P.n
    theta = epsilon * n * P.gamma / (1.0 + epsilon)
    lhs = Kd - (nystrom(Kd, lm, theta).dense() if len(lm) else 0.0)
    rhs = epsilon * n * P.gamma / (1.0 - t * (1.0 + epsilon)) * (Psi.T @ Psi)
    gap = rhs - lhs
    return Lemma4Report(lam, t, True, float(np.linalg.eigvalsh(0.5 * (gap + gap.T))[0]), tol)


@dataclass(frozen=True)
class GuaranteeTrial:
    error: float
    bound: float
    num_landmarks: int

    @property
    def success(self) -> bool:
        return self.error <= self.bound


def ras_guarantee_trial(K, P: ProjectorKernel, epsilon: float, c: float, t: float = 0.5,
                        rng_seed=None) -> GuaranteeTrial:
    """One RAS run scored by ``|K - L_{eps n gamma/(1+eps), S}(K)|_2`` against ``2 eps n gamma / (1 - eps)``."""
    Kd = _dense(K)
    n = Kd.shape[0]
    trace = ras_sample(P, epsilon, c, t, rng_seed)
    theta = epsilon * n * P.gamma / (1.0 + epsilon)
    approx = nystrom(Kd, trace.landmarks, theta).dense() if len(trace.landmarks) else 0.0
    err = _opnorm_sym(Kd - approx)
    return GuaranteeTrial(err, 2.0 * epsilon * n * P.gamma / (1.0 - epsilon), len(trace.landmarks))
