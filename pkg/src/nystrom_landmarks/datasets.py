"""Seeded synthetic point clouds with regions of unequal density.

Each generator returns ``(points, labels)``; the label marks the region a point
was drawn from, with region 0 always the densest one.
"""

from __future__ import annotations

import numpy as np


def _split(n: int, fractions) -> list[int]:
    counts = [int(round(f * n)) for f in fractions]
    counts[0] += n - sum(counts)
    return counts


def make_blobs(n: int = 300, seed=0, d: int = 2):
    """Three Gaussian blobs holding 60%, 30% and 10% of the points with growing spread."""
    rng = np.random.default_rng(seed)
    centers = np.zeros((3, d))
    centers[1, 0], centers[2, 0] = 4.0, -4.0
    centers[2, 1 % d] += 3.0
    spreads = (0.3, 0.6, 1.2)
    parts, labels = [], []
    for r, cnt in enumerate(_split(n, (0.6, 0.3, 0.1))):
        parts.append(centers[r] + spreads[r] * rng.normal(size=(cnt, d)))
        labels.append(np.full(cnt, r))
    return np.vstack(parts), np.concatenate(labels)


def make_ring_cluster(n: int = 300, seed=0):
    """A tight central cluster (70%) inside a wide noisy ring (30%)."""
    rng = np.random.default_rng(seed)
    n_in, n_ring = _split(n, (0.7, 0.3))
    inner = 0.25 * rng.normal(size=(n_in, 2))
    theta = rng.uniform(0.0, 2.0 * np.pi, n_ring)
    radius = 3.0 + 0.1 * rng.normal(size=n_ring)
    ring = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    return np.vstack([inner, ring]), np.concatenate([np.zeros(n_in, int), np.ones(n_ring, int)])


def make_two_moons(n: int = 300, seed=0, dense_fraction: float = 0.8, noise: float = 0.05):
    """Two interleaved half circles; the upper moon receives ``dense_fraction`` of the points."""
    rng = np.random.default_rng(seed)
    n_a, n_b = _split(n, (dense_fraction, 1.0 - dense_fraction))
    ta = rng.uniform(0.0, np.pi, n_a)
    tb = rng.uniform(0.0, np.pi, n_b)
    upper = np.column_stack([np.cos(ta), np.sin(ta)])
    lower = np.column_stack([1.0 - np.cos(tb), 0.5 - np.sin(tb)])
    X = np.vstack([upper, lower]) + noise * rng.normal(size=(n, 2))
    return X, np.concatenate([np.zeros(n_a, int), np.ones(n_b, int)])


GENERATORS = {
    "blobs": make_blobs,
    "ring": make_ring_cluster,
    "moons": make_two_moons,
}
