"""Random Fourier features and the approximate randomized adaptive sampler."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .kernel_core import KernelFamily, KernelSpec, _as_points
from .projector import jittered_cholesky
from .samplers import RasTrace, run_ras

DEFAULT_NUM_FEATURES = 4000


@dataclass(frozen=True)
class RffMap:
    """Cosine features ``z(x) = sqrt(2/n_F) cos(W x + b)`` for the Gaussian kernel."""

    frequencies: np.ndarray
    phases: np.ndarray

    @property
    def num_features(self) -> int:
        return self.frequencies.shape[0]

    @property
    def scale(self) -> float:
        return math.sqrt(2.0 / self.num_features)

    def __call__(self, x) -> np.ndarray:
        return featurize(self, np.atleast_2d(x))


def rff_build(spec: KernelSpec, d: int, num_features: int = DEFAULT_NUM_FEATURES, rng_seed=None) -> RffMap:
    if spec.family is not KernelFamily.GAUSSIAN:
        raise ValueError(f"random Fourier features are only provided for the Gaussian kernel, not {spec.family.value}")
    if num_features < 1 or d < 1:
        raise ValueError("need at least one feature and one input dimension")
    rng = np.random.default_rng(rng_seed)
    W = rng.normal(0.0, 1.0 / spec.sigma, size=(num_features, d))
    b = rng.uniform(0.0, 2.0 * math.pi, size=num_features)
    return RffMap(W, b)


def featurize(rff: RffMap, data) -> np.ndarray:
    X = _as_points(data)
    if X.shape[1] != rff.frequencies.shape[1]:
        raise ValueError(f"feature map expects d={rff.frequencies.shape[1]}, got {X.shape[1]}")
    return rff.scale * np.cos(X @ rff.frequencies.T + rff.phases)


class ApproxProjector:
    """``F (F^T F + n gamma I)^{-1} F^T`` accessed through its diagonal and columns.

    Only the ``n_F x n_F`` Cholesky factor of ``F^T F + n gamma I`` is stored.
    """

    def __init__(self, F: np.ndarray, gamma: float, chunk: int = 4096):
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        self.F = np.asarray(F, dtype=float)
        n, nf = self.F.shape
        self.gamma = float(gamma)
        G = self.F.T @ self.F + n * gamma * np.eye(nf)
        self.chol = jittered_cholesky(0.5 * (G + G.T), "feature Gram matrix")
        diag = np.empty(n)
        for start in range(0, n, chunk):
            H = solve_triangular(self.chol, self.F[start:start + chunk].T, lower=True)
            diag[start:start + chunk] = np.sum(H**2, axis=0)
        self._diag = diag

    @property
    def n(self) -> int:
        return self.F.shape[0]

    def diagonal(self) -> np.ndarray:
        return self._diag.copy()

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve((self.chol, True), rhs)

    def column(self, j: int) -> np.ndarray:
        return self.F @ self.solve(self.F[j])

    def block(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=int).reshape(-1)
        cols = np.asarray(cols, dtype=int).reshape(-1)
        return self.F[rows] @ self.solve(self.F[cols].T)

    def dense(self) -> np.ndarray:
        return self.block(np.arange(self.n), np.arange(self.n))


def approx_projector_diag_and_columns(F, gamma: float) -> ApproxProjector:
    return ApproxProjector(F, gamma)


class CoreInverse:
    """Inverse of ``S^T Phat S + eps I`` grown by bordering (block matrix inversion).

    ``refresh_every`` acceptances trigger a from-scratch inverse to cap drift.
    """

    def __init__(self, proj: ApproxProjector, epsilon: float, refresh_every: int = 256):
        self.proj = proj
        self.eps = float(epsilon)
        self.refresh_every = refresh_every
        self.indices: list[int] = []
        self.weights: list[float] = []
        nf = proj.F.shape[1]
        # Q = G^{-1} F_S^T diag(w): row i of Phat S is F_i @ Q.
        self._Q = np.zeros((nf, 16))
        self.inv = np.zeros((0, 0))

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def Q(self) -> np.ndarray:
        return self._Q[:, : len(self.indices)]

    def cross(self, i: int) -> np.ndarray:
        """``S^T Phat e_i``."""
        return self.proj.F[i] @ self.Q

    def core(self) -> np.ndarray:
        idx = np.array(self.indices, dtype=int)
        w = np.array(self.weights)
        return w[:, None] * self.proj.block(idx, idx) * w[None, :] + self.eps * np.eye(len(idx))

    def add(self, j: int, weight: float):
        q = weight * self.proj.solve(self.proj.F[j])
        b = weight * self.cross(j)
        a = weight**2 * self.proj._diag[j] + self.eps
        u = self.inv @ b
        schur = a - b @ u
        m = len(self.indices)
        inv = np.empty((m + 1, m + 1))
        inv[:m, :m] = self.inv + np.outer(u, u) / schur
        inv[:m, m] = -u / schur
        inv[m, :m] = -u / schur
        inv[m, m] = 1.0 / schur
        self.inv = inv
        if m == self._Q.shape[1]:
            self._Q = np.concatenate([self._Q, np.zeros_like(self._Q)], axis=1)
        self._Q[:, m] = q
        self.indices.append(int(j))
        self.weights.append(float(weight))
        if self.refresh_every and len(self.indices) % self.refresh_every == 0:
            self.refresh()

    def refresh(self):
        M = self.core()
        self.inv = np.linalg.inv(0.5 * (M + M.T))
        self.inv = 0.5 * (self.inv + self.inv.T)


class _ApproxScorer:
    def __init__(self, proj: ApproxProjector, epsilon: float, refresh_every: int = 256):
        self.proj = proj
        self.eps = epsilon
        self.core = CoreInverse(proj, epsilon, refresh_every)

    @property
    def n(self) -> int:
        return self.proj.n

    def score(self, i: int) -> float:
        b = self.core.cross(i)
        r = self.proj._diag[i] - b @ self.core.inv @ b
        return max(float(r), 0.0) / self.eps

    def accept(self, i: int, p: float):
        self.core.add(i, 1.0 / math.sqrt(p))


def approx_ras(F, gamma: float, epsilon: float, c: float, t: float = 0.5, rng_seed=None,
               refresh_every: int = 256) -> RasTrace:
    """Randomized adaptive sampling against the feature-space projector ``Phat``."""
    proj = F if isinstance(F, ApproxProjector) else ApproxProjector(F, gamma)
    trace = run_ras(_ApproxScorer(proj, epsilon, refresh_every), epsilon, c, t, rng_seed)
    trace.params["gamma"] = gamma
    trace.params["num_features"] = proj.F.shape[1]
    return trace


# Binary feature cache: magic, rows and cols as little-endian uint64, then float64 row-major data.
_MAGIC = b"RFFMAT01"


def save_features(path, F: np.ndarray) -> None:
    F = np.ascontiguousarray(F, dtype="<f8")
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", *F.shape))
        fh.write(F.tobytes())


def load_features(path) -> np.ndarray:
    with Path(path).open("rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a feature cache file")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated feature cache ({data.size} of {rows * cols} values)")
    return data.reshape(rows, cols).astype(float)
