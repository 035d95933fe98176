"""Flat clustering of phrase embeddings and Gaussian-mixture initialization.

Complete-linkage agglomeration runs on a cosine distance matrix through a
compiled kernel when the extension built, with a pure-Python fallback
selected at import (override with KGCANON_PURE=1).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .kg import Clustering

if os.environ.get("KGCANON_PURE"):
    from . import _agglo_py as _kernel
    KERNEL = "python"
else:
    try:
        from . import _agglo as _kernel  # type: ignore[no-redef]
        KERNEL = "compiled"
    except ImportError:
        from . import _agglo_py as _kernel  # type: ignore[no-redef]
        KERNEL = "python"


def hac_backend() -> str:
    """Which agglomeration kernel is active: 'compiled' or 'python'."""
    return KERNEL


@dataclass(frozen=True)
class HacConfig:
    threshold: float
    linkage: str = "complete"
    metric: str = "cosine"

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.linkage != "complete" or self.metric != "cosine":
            raise ValueError("only complete linkage over cosine distance is supported")


@dataclass
class GaussianMixture:
    """Diagonal Gaussian mixture; variances kept in the log domain."""

    pi: np.ndarray        # (K,)
    means: np.ndarray     # (K, d)
    log_vars: np.ndarray  # (K, d), clamped to [-10, 10]

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.log_vars = np.clip(np.asarray(self.log_vars, dtype=np.float64), -10.0, 10.0)
        if self.pi.ndim != 1 or self.means.shape[0] != self.pi.size \
                or self.log_vars.shape != self.means.shape:
            raise ValueError("inconsistent mixture shapes")
        if self.pi.size < 1 or np.any(self.pi <= 0) \
                or abs(self.pi.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be positive and sum to 1")

    @property
    def num_components(self) -> int:
        return self.pi.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def cosine_distances(points: np.ndarray) -> np.ndarray:
    """Full symmetric matrix of 1 - cos(a, b); zero vectors are at distance 1
    from everything except other zero vectors (distance 0)."""
    x = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    unit = x / safe[:, None]
    dist = 1.0 - unit @ unit.T
    dist[zero, :] = 1.0
    dist[:, zero] = 1.0
    dist[np.ix_(zero, zero)] = 0.0
    np.fill_diagonal(dist, 0.0)
    return dist


def hac_cluster(points: np.ndarray, cfg: HacConfig,
                namespace: str = "entity") -> Clustering:
    """Complete-linkage agglomeration: repeatedly merge the closest pair of
    clusters while its distance stays <= cfg.threshold. Ties break on the
    smallest (min member id, other min member id)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("points must be a non-empty 2-D matrix")
    n = points.shape[0]
    dist = cosine_distances(points)
    parent = np.empty(n, dtype=np.int64)
    nn_dist = np.empty(n, dtype=np.float64)
    nn_idx = np.empty(n, dtype=np.int64)
    active = np.empty(n, dtype=np.uint8)
    _kernel.agglomerate(dist, float(cfg.threshold), parent, nn_dist, nn_idx, active)
    return _labels_from_parents(parent, namespace)


def _labels_from_parents(parent: np.ndarray, namespace: str) -> Clustering:
    n = parent.size
    root = np.empty(n, dtype=np.int64)
    for i in range(n):
        r = i
        while parent[r] != r:
            r = parent[r]
        # path compression keeps the resolution linear overall
        j = i
        while parent[j] != r:
            parent[j], j = r, parent[j]
        root[i] = r
    labels = np.empty(n, dtype=np.int64)
    remap: dict[int, int] = {}
    for i in range(n):
        labels[i] = remap.setdefault(int(root[i]), len(remap))
    return Clustering(labels, namespace)


def kmeans_cluster(points: np.ndarray, k: int, seed: int,
                   max_iters: int = 100, namespace: str = "entity") -> Clustering:
    """Lloyd iterations from k-means++ seeding until the assignment stops
    changing; deterministic for a fixed seed."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = points[idx]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iters):
        d2all = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2all.argmin(axis=1)  # ties pick the smallest center id
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if members.shape[0]:
                centers[c] = members.mean(axis=0)
    # drop empty clusters and relabel densely, ordered by smallest member
    return Clustering(labels, namespace).canonicalize()


def init_mixture(points: np.ndarray, clustering: Clustering,
                 var_floor: float = 1e-4) -> GaussianMixture:
    """Within-cluster means and (floored) population variances, with weights
    proportional to cluster sizes."""
    points = np.asarray(points, dtype=np.float64)
    n, d = points.shape
    if clustering.labels.size != n:
        raise ValueError("clustering does not partition the points")
    if var_floor <= 0:
        raise ValueError("var_floor must be positive")
    k = clustering.num_clusters
    pi = np.empty(k, dtype=np.float64)
    means = np.empty((k, d), dtype=np.float64)
    variances = np.empty((k, d), dtype=np.float64)
    for c, members in enumerate(clustering.clusters()):
        pts = points[members]
        pi[c] = members.size / n
        means[c] = pts.mean(axis=0)
        variances[c] = np.maximum(pts.var(axis=0), var_floor)
    return GaussianMixture(pi, means, np.log(variances))
