"""Datasets, kernel evaluation and dense kernel matrices."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import CapacityError, DataQualityError


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class KernelSpec:
    """Shift-invariant kernel with bandwidth ``sigma``.

    Gaussian RBF: ``exp(-|x - y|^2 / (2 sigma^2))``; Laplace: ``exp(-|x - y| / sigma)``.
    """

    family: KernelFamily = KernelFamily.GAUSSIAN
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"kernel bandwidth must be positive, got {self.sigma}")

    def from_sqdist(self, sqdist: np.ndarray) -> np.ndarray:
        if self.family is KernelFamily.GAUSSIAN:
            return np.exp(-sqdist / (2.0 * self.sigma**2))
        return np.exp(-np.sqrt(sqdist) / self.sigma)


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    feature_means: np.ndarray
    feature_stds: np.ndarray
    labels: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataQualityError(f"expected a non-empty n x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DataQualityError("dataset contains non-finite entries")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @classmethod
    def raw(cls, points, labels=None) -> "Dataset":
        """Wrap points without standardizing them."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = pts.shape[1]
        return cls(pts, np.zeros(d), np.ones(d), labels)


def standardize(raw, labels=None) -> Dataset:
    """Center each column and scale it to unit (population) variance.

    Columns with zero variance become zero columns and record a std of 1.
    """
    X = np.atleast_2d(np.asarray(raw, dtype=float))
    if X.ndim != 2:
        raise DataQualityError(f"expected a 2-d array, got {X.ndim} dimensions")
    if X.shape[0] < 2:
        raise DataQualityError("standardization needs at least two points")
    if not np.all(np.isfinite(X)):
        raise DataQualityError("input contains NaN or infinite entries")
    means = X.mean(axis=0)
    centered = X - means
    stds = np.sqrt(np.mean(centered**2, axis=0))
    # Relative threshold so that a column like (5, 5, 5) with rounding noise still counts as constant.
    constant = stds <= 1e-14 * np.maximum(1.0, np.abs(means))
    stds = np.where(constant, 1.0, stds)
    Z = centered / stds
    Z[:, constant] = 0.0
    return Dataset(Z, means, stds, labels)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    return float(spec.from_sqdist(np.dot(diff, diff)))


def _as_points(data) -> np.ndarray:
    return data.points if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))


# Entries above this count are refused rather than attempted (~8 GB of float64).
MAX_DENSE_ENTRIES = 10**9


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    spec: KernelSpec | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def spectrum(self) -> np.ndarray:
        """Eigenvalues in decreasing order."""
        return np.linalg.eigvalsh(self.entries)[::-1]

    def block(self, rows, cols) -> np.ndarray:
        return self.entries[np.ix_(np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()


def kernel_matrix(spec: KernelSpec, data) -> KernelMatrix:
    X = _as_points(data)
    n = X.shape[0]
    if n * n > MAX_DENSE_ENTRIES:
        raise CapacityError(f"dense {n} x {n} kernel matrix exceeds the configured capacity")
    try:
        K = spec.from_sqdist(cdist(X, X, "sqeuclidean"))
    except MemoryError as exc:
        raise CapacityError(f"could not allocate a {n} x {n} kernel matrix") from exc
    # cdist is exactly symmetric with a zero diagonal; enforce it anyway for the Laplace sqrt path.
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return KernelMatrix(K, spec)


def kernel_cross(spec: KernelSpec, data, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    X = _as_points(data)
    n = X.shape[0]
    rows = np.asarray(rows, dtype=int).reshape(-1)
    cols = np.asarray(cols, dtype=int).reshape(-1)
    for name, idx in (("row", rows), ("column", cols)):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError(f"{name} index out of range for n={n}")
    return spec.from_sqdist(cdist(X[rows], X[cols], "sqeuclidean"))


class KernelSource:
    """Lazy access to blocks of the kernel matrix of a dataset."""

    def __init__(self, spec: KernelSpec, data):
        self.spec = spec
        self.points = _as_points(data)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def block(self, rows, cols) -> np.ndarray:
        return kernel_cross(self.spec, self.points, rows, cols)

    def column(self, j: int) -> np.ndarray:
        return kernel_cross(self.spec, self.points, np.arange(self.n), [j])[:, 0]

    def diagonal(self) -> np.ndarray:
        return np.ones(self.n)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_csv(path, drop_column: int | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a numeric CSV, skipping a non-numeric header row.

    Returns ``(points, dropped)`` where ``dropped`` holds the removed column (e.g. labels).
    """
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(tok.strip() for tok in r)]
    if not rows:
        raise DataQualityError(f"{path}: no data rows")
    if not all(_is_number(tok) for tok in rows[0]):
        rows = rows[1:]
    try:
        X = np.array([[float(tok) for tok in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DataQualityError(f"{path}: non-numeric entry ({exc})") from exc
    dropped = None
    if drop_column is not None:
        dropped = X[:, drop_column].copy()
        X = np.delete(X, drop_column, axis=1)
    if X.ndim != 2 or X.shape[1] == 0:
        raise DataQualityError(f"{path}: no feature columns")
    return X, dropped


def load_dataset(path, drop_column: int | None = None) -> Dataset:
    X, labels = read_csv(path, drop_column)
    return standardize(X, labels)
