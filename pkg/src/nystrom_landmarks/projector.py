"""Projector (smoothing) kernel, leverage scores and regularized Nystrom approximations.

The projector kernel of a PSD matrix ``K`` with regularizer ``reg`` is
``K (K + reg I)^{-1}``; for a kernel matrix on ``n`` points the ridge
regularizer is ``reg = n * gamma``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cholesky, eigh, solve_triangular

from .errors import SingularMatrixError
from .kernel_core import KernelMatrix, KernelSource, kernel_cross

log = logging.getLogger(__name__)

JITTER = 1e-12
_MAX_JITTER_TRIES = 6


@dataclass(frozen=True)
class ProjectorKernel:
    entries: np.ndarray
    gamma: float
    reg: float
    factor: np.ndarray
    spectrum: np.ndarray
    eigvecs: np.ndarray
    base_spectrum: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, j]

    def block(self, rows, cols) -> np.ndarray:
        return self.entries[np.ix_(np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))]


def _dense(A) -> np.ndarray:
    if isinstance(A, (KernelMatrix, ProjectorKernel)):
        return A.entries
    return np.asarray(A, dtype=float)


def smoothing_kernel(A, reg: float) -> ProjectorKernel:
    """Return ``A (A + reg I)^{-1}`` for a symmetric PSD matrix ``A``.

    Computed as ``V diag(lam / (lam + reg)) V^T`` from the eigendecomposition of
    ``A`` so the result is symmetric by construction. The factor ``B`` satisfies
    ``B^T B = P``.
    """
    if not reg > 0:
        raise ValueError(f"regularizer must be positive, got {reg}")
    A = _dense(A)
    n = A.shape[0]
    lam, V = eigh(0.5 * (A + A.T))
    lam = np.clip(lam[::-1], 0.0, None)
    V = V[:, ::-1]
    Lam = lam / (lam + reg)
    P = (V * Lam) @ V.T
    P = 0.5 * (P + P.T)
    B = np.sqrt(Lam)[:, None] * V.T
    return ProjectorKernel(P, reg / n, reg, B, Lam, V, lam)


def projector_kernel(K, gamma: float) -> ProjectorKernel:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    n = _dense(K).shape[0]
    return smoothing_kernel(K, n * gamma)


def leverage_scores(P: ProjectorKernel) -> np.ndarray:
    return P.diagonal()


def effective_dimension(P: ProjectorKernel) -> float:
    return float(np.trace(P.entries))


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered landmark indices, optionally weighted by inclusion probabilities.

    The sampling matrix has column ``e_i / sqrt(p_i)`` for each landmark ``i``
    (``e_i`` when no probabilities are attached).
    """

    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    probabilities: np.ndarray | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).reshape(-1)
        if len(np.unique(idx)) != len(idx):
            raise ValueError("landmark indices must be distinct")
        object.__setattr__(self, "indices", idx)
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=float).reshape(-1)
            if p.shape != idx.shape:
                raise ValueError("probabilities must align with indices")
            if np.any(p <= 0) or np.any(p > 1):
                raise ValueError("probabilities must lie in (0, 1]")
            object.__setattr__(self, "probabilities", p)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def weights(self) -> np.ndarray:
        """Column scalings ``1 / sqrt(p_i)``."""
        if self.probabilities is None:
            return np.ones(len(self.indices))
        return 1.0 / np.sqrt(self.probabilities)

    def unweighted(self) -> "LandmarkSet":
        return LandmarkSet(self.indices)

    def sampling_matrix(self, n: int) -> np.ndarray:
        S = np.zeros((n, len(self.indices)))
        S[self.indices, np.arange(len(self.indices))] = self.weights
        return S


def as_landmarks(landmarks) -> LandmarkSet:
    if isinstance(landmarks, LandmarkSet):
        return landmarks
    return LandmarkSet(np.asarray(list(landmarks) if not isinstance(landmarks, np.ndarray) else landmarks, dtype=int))


class _DenseSource:
    def __init__(self, A: np.ndarray):
        self.A = A

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def block(self, rows, cols) -> np.ndarray:
        return self.A[np.ix_(np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))]

    def column(self, j: int) -> np.ndarray:
        return self.A[:, j]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.A).copy()


def as_source(base):
    """Wrap a dense matrix (or KernelMatrix/ProjectorKernel) as a column source."""
    if hasattr(base, "block") and hasattr(base, "n") and not isinstance(base, (KernelMatrix, ProjectorKernel)):
        return base
    return _DenseSource(_dense(base))


def jittered_cholesky(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of ``M``, adding trace-scaled jitter if ``M`` is numerically singular."""
    m = M.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    try:
        return cholesky(M, lower=True)
    except np.linalg.LinAlgError:
        pass
    scale = max(np.trace(M) / m, np.finfo(float).tiny)
    jitter = JITTER * scale
    for _ in range(_MAX_JITTER_TRIES):
        log.info("adding jitter %.3g to %s of size %d", jitter, what, m)
        try:
            return cholesky(M + jitter * np.eye(m), lower=True)
        except np.linalg.LinAlgError:
            jitter *= 100.0
    raise SingularMatrixError(f"{what} is singular beyond the jitter policy")


class NystromApprox:
    """Factored ``L_{mu,S}(A) = A S (S^T A S + mu I)^{-1} S^T A``.

    Stored as ``W W^T`` restricted to requested rows, where
    ``W = A S L^{-T}`` and ``L`` is the Cholesky factor of the core matrix.
    """

    def __init__(self, base, landmarks, mu: float = 0.0):
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        self.source = as_source(base)
        self.landmarks = as_landmarks(landmarks)
        self.mu = float(mu)
        idx = self.landmarks.indices
        w = self.landmarks.weights
        core = w[:, None] * self.source.block(idx, idx) * w[None, :]
        core = 0.5 * (core + core.T) + self.mu * np.eye(len(idx))
        if self.mu == 0.0:
            try:
                self.core_factor = cholesky(core, lower=True) if len(idx) else np.zeros((0, 0))
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(
                    "core matrix S^T A S is singular; use mu > 0 (e.g. 1e-12) as a stabilizer"
                ) from exc
        else:
            self.core_factor = jittered_cholesky(core, "Nystrom core matrix")

    @property
    def n(self) -> int:
        return self.source.n

    def factor_rows(self, rows) -> np.ndarray:
        """Rows of ``W`` so that ``approx[r, c] = W[r] @ W[c]``."""
        rows = np.asarray(rows, dtype=int).reshape(-1)
        idx = self.landmarks.indices
        if len(idx) == 0:
            return np.zeros((len(rows), 0))
        C = self.source.block(rows, idx) * self.landmarks.weights[None, :]
        return solve_triangular(self.core_factor, C.T, lower=True).T

    def block(self, rows, cols) -> np.ndarray:
        Wr = self.factor_rows(rows)
        Wc = Wr if np.array_equal(np.asarray(rows), np.asarray(cols)) else self.factor_rows(cols)
        return Wr @ Wc.T

    def dense(self) -> np.ndarray:
        W = self.factor_rows(np.arange(self.n))
        return W @ W.T


def nystrom(base, landmarks, mu: float = 0.0) -> NystromApprox:
    return NystromApprox(base, landmarks, mu)


class IncrementalNystrom:
    """Residual diagonal of ``A - L_{mu,S}(A)`` grown one landmark at a time.

    Keeps ``V = L^{-1} S^T A`` where ``L L^T = S^T A S + mu I``; appending a
    landmark adds one row to ``V`` and one row to ``L``. Used by the adaptive
    samplers, where each step needs the full residual diagonal.
    """

    def __init__(self, source, mu: float = 0.0, capacity: int | None = None):
        self.source = as_source(source)
        self.mu = float(mu)
        n = self.source.n
        cap = n if capacity is None else max(1, min(capacity, n))
        self._V = np.zeros((cap, n))
        self._L = np.zeros((cap, cap))
        self._m = 0
        self.indices: list[int] = []
        self.weights: list[float] = []
        self.diag = np.asarray(self.source.diagonal(), dtype=float)
        self.residual = self.diag.copy()

    def __len__(self) -> int:
        return self._m

    @property
    def V(self) -> np.ndarray:
        return self._V[: self._m]

    @property
    def core_factor(self) -> np.ndarray:
        return self._L[: self._m, : self._m]

    def _grow(self):
        cap = self._V.shape[0]
        new = min(2 * cap, max(self.source.n, cap + 1))
        V = np.zeros((new, self._V.shape[1]))
        V[:cap] = self._V
        L = np.zeros((new, new))
        L[:cap, :cap] = self._L
        self._V, self._L = V, L

    def add(self, j: int, weight: float = 1.0) -> float:
        """Append landmark ``j`` with column scaling ``weight``; return the new pivot."""
        m = self._m
        if m == self._V.shape[0]:
            self._grow()
        col = np.asarray(self.source.column(j), dtype=float)
        l = self._V[:m, j]
        pivot2 = weight**2 * (self.diag[j] - l @ l) + self.mu
        if not pivot2 > 0:
            # Exactly dependent column with mu = 0: fall back on the jitter scale of the diagonal.
            pivot2 = JITTER * max(self.diag.mean(), np.finfo(float).tiny)
            log.info("adding jitter %.3g to pivot of landmark %d", pivot2, j)
        d = np.sqrt(pivot2)
        row = weight * (col - l @ self._V[:m]) / d
        self._V[m] = row
        self._L[m, :m] = weight * l
        self._L[m, m] = d
        self._m += 1
        self.indices.append(int(j))
        self.weights.append(float(weight))
        self.residual = self.residual - row**2
        return d


def residual_diagonal(P, landmarks) -> np.ndarray:
    """Diagonal of ``P - P_C P_CC^{-1} P_C^T`` for the landmark set ``C``."""
    src = as_source(P)
    lm = as_landmarks(landmarks)
    diag = np.asarray(src.diagonal(), dtype=float)
    if len(lm) == 0:
        return diag
    idx = lm.indices
    w = lm.weights
    core = w[:, None] * src.block(idx, idx) * w[None, :]
    Lc = jittered_cholesky(0.5 * (core + core.T), "landmark submatrix")
    C = src.block(np.arange(src.n), idx) * w[None, :]
    Y = solve_triangular(Lc, C.T, lower=True)
    return diag - np.sum(Y**2, axis=0)


def regularized_residual(P, landmarks, eps: float) -> np.ndarray:
    """Dense ``P - L_{eps,S}(P)``."""
    Pd = _dense(P)
    return Pd - nystrom(Pd, landmarks, eps).dense()


def _opnorm_sym(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    return float(max(abs(ev[0]), abs(ev[-1])))


def error_operator_norm(K, approx: NystromApprox) -> float:
    """Relative spectral-norm error ``|K - Khat|_2 / |K|_2``."""
    Kd = _dense(K)
    return _opnorm_sym(Kd - approx.dense()) / _opnorm_sym(Kd)


def error_max_norm(A, approx: NystromApprox) -> float:
    return float(np.max(np.abs(_dense(A) - approx.dense())))


def error_frobenius_subsets(spec, data, approx: NystromApprox, subset_size: int,
                            num_subsets: int, rng_seed=None) -> np.ndarray:
    """Frobenius errors on principal submatrices indexed by uniform random subsets."""
    n = approx.n
    if not 1 <= subset_size <= n:
        raise ValueError(f"subset_size must be in [1, {n}]")
    rng = np.random.default_rng(rng_seed)
    errors = np.empty(num_subsets)
    for s in range(num_subsets):
        rows = np.sort(rng.choice(n, size=subset_size, replace=False))
        K_sub = kernel_cross(spec, data, rows, rows)
        errors[s] = np.linalg.norm(K_sub - approx.block(rows, rows), "fro")
    return errors


@dataclass(frozen=True)
class PsdGapReport:
    min_eigenvalue: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.min_eigenvalue >= -self.tolerance


def check_lemma1(K, P: ProjectorKernel, landmarks, mu: float) -> PsdGapReport:
    """Check ``K - L_mu(K) <= (lam_max + n gamma)(P - L_{mu~}(P))`` with ``mu~ = mu/(lam_max + n gamma)``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    Kd = _dense(K)
    lam_max = float(P.base_spectrum[0]) if len(P.base_spectrum) else 0.0
    scale = lam_max + P.reg
    lhs = Kd - nystrom(Kd, landmarks, mu).dense()
    rhs = scale * (P.entries - nystrom(P.entries, landmarks, mu / scale).dense())
    gap = rhs - lhs
    return PsdGapReport(float(np.linalg.eigvalsh(0.5 * (gap + gap.T))[0]), 1e-8 * lam_max)


def check_corollary1(P: ProjectorKernel, landmarks) -> float:
    """Gap between the max-norm of the projector residual and the max of its diagonal."""
    resid = P.entries - nystrom(P.entries, landmarks, 0.0).dense() if len(as_landmarks(landmarks)) else P.entries
    return abs(float(np.max(np.abs(resid))) - float(np.max(residual_diagonal(P, landmarks))))


def lemma2_rhs(P: ProjectorKernel, landmarks, eps: float) -> np.ndarray:
    """``B^T (B S S^T B^T + eps I)^{-1} B`` for ``B^T B = P``."""
    B = P.factor
    S = as_landmarks(landmarks).sampling_matrix(P.n)
    BS = B @ S
    M = BS @ BS.T + eps * np.eye(B.shape[0])
    Lm = cholesky(0.5 * (M + M.T), lower=True)
    Y = solve_triangular(Lm, B, lower=True)
    return Y.T @ Y


def check_lemma2(P: ProjectorKernel, landmarks, eps: float) -> float:
    """Max entrywise gap between both sides of the subtracted-leverage identity, relative to their scale."""
    lhs = regularized_residual(P, landmarks, eps) / eps
    rhs = lemma2_rhs(P, landmarks, eps)
    return float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))))


def check_lemma3(K, gamma: float, eps: float) -> float:
    """Max entrywise gap of ``P_eps(P_{n gamma}(K)) = P_{eps n gamma/(1+eps)}(K) / (1 + eps)``."""
    Kd = _dense(K)
    n = Kd.shape[0]
    P = projector_kernel(Kd, gamma)
    lhs = smoothing_kernel(P.entries, eps).entries
    rhs = smoothing_kernel(Kd, eps * n * gamma / (1.0 + eps)).entries / (1.0 + eps)
    return float(np.max(np.abs(lhs - rhs)))


def dump_matrix_csv(path, A: np.ndarray) -> None:
    np.savetxt(path, np.asarray(A), delimiter=",", fmt="%.17e")


__all__ = [
    "ProjectorKernel", "LandmarkSet", "NystromApprox", "IncrementalNystrom", "PsdGapReport",
    "smoothing_kernel", "projector_kernel", "leverage_scores", "effective_dimension",
    "nystrom", "residual_diagonal", "regularized_residual", "error_operator_norm",
    "error_max_norm", "error_frobenius_subsets", "check_lemma1", "check_corollary1",
    "check_lemma2", "lemma2_rhs", "check_lemma3", "as_landmarks", "as_source",
    "jittered_cholesky", "dump_matrix_csv", "KernelSource",
]
