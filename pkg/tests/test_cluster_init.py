import numpy as np
import pytest

from kgcanon import _agglo_py
from kgcanon.cluster_init import (GaussianMixture, HacConfig, cosine_distances,
                                  hac_backend, hac_cluster, init_mixture,
                                  kmeans_cluster)
from kgcanon.kg import Clustering


def exhaustive_hac(dist, threshold):
    """Independent oracle: recompute every cluster-pair complete-linkage
    distance from the base matrix at every step; same tie rule."""
    clusters = [[i] for i in range(dist.shape[0])]
    while len(clusters) > 1:
        best = None
        for x in range(len(clusters)):
            for y in range(x + 1, len(clusters)):
                d = max(dist[i, j] for i in clusters[x] for j in clusters[y])
                lo = min(min(clusters[x]), min(clusters[y]))
                hi = max(min(clusters[x]), min(clusters[y]))
                key = (d, lo, hi)
                if best is None or key < best[0]:
                    best = (key, x, y)
        (d, _, _), x, y = best
        if d > threshold:
            break
        clusters[x] = sorted(clusters[x] + clusters[y])
        del clusters[y]
    clusters.sort(key=min)
    labels = np.empty(dist.shape[0], dtype=np.int64)
    for lab, members in enumerate(clusters):
        labels[members] = lab
    return labels


def test_hac_spec_example():
    pts = np.array([[1.0, 0.0], [0.99, 0.14], [-1.0, 0.0]])
    c = hac_cluster(pts, HacConfig(0.5))
    assert list(c.labels) == [0, 0, 1]


def test_hac_zero_threshold_generic_points(rng):
    pts = rng.normal(size=(10, 4))
    c = hac_cluster(pts, HacConfig(0.0))
    assert c.num_clusters == 10


def test_hac_identical_rows_merge():
    pts = np.tile(np.array([1.0, 2.0]), (6, 1))
    assert hac_cluster(pts, HacConfig(1e-6)).num_clusters == 1


def test_hac_dimension_error():
    with pytest.raises(ValueError):
        hac_cluster(np.zeros((0, 3)), HacConfig(0.5))


def test_hac_matches_exhaustive_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        pts = rng.normal(size=(n, 3))
        threshold = float(rng.uniform(0.0, 1.5))
        got = hac_cluster(pts, HacConfig(threshold)).labels
        want = exhaustive_hac(cosine_distances(pts), threshold)
        assert np.array_equal(got, want), (pts, threshold)


def test_hac_compiled_and_python_kernels_agree(rng):
    if hac_backend() != "compiled":
        pytest.skip("compiled kernel not built")
    for _ in range(30):
        n = int(rng.integers(2, 60))
        pts = rng.normal(size=(n, 6))
        threshold = float(rng.uniform(0.1, 1.2))
        dist = cosine_distances(pts)
        parent = np.empty(n, np.int64)
        buf = (np.empty(n), np.empty(n, np.int64), np.empty(n, np.uint8))
        _agglo_py.agglomerate(dist.copy(), threshold, parent, *buf)

        from kgcanon import _agglo
        parent_c = np.empty(n, np.int64)
        _agglo.agglomerate(dist.copy(), threshold, parent_c, *buf)
        assert np.array_equal(parent, parent_c)


def test_hac_monotone_in_threshold(rng):
    pts = rng.normal(size=(25, 5))
    counts = [hac_cluster(pts, HacConfig(t)).num_clusters
              for t in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0)]
    assert counts == sorted(counts, reverse=True)


def test_cosine_distance_zero_vectors():
    pts = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    dist = cosine_distances(pts)
    assert dist[0, 1] == 1.0 and dist[1, 0] == 1.0
    assert dist[1, 2] == 0.0
    c = hac_cluster(pts, HacConfig(0.5))
    assert c.labels[1] == c.labels[2] != c.labels[0]


# ---------------------------------------------------------------------------
# kmeans

def test_kmeans_k_equals_n(rng):
    pts = rng.normal(size=(6, 3))
    c = kmeans_cluster(pts, 6, seed=0)
    assert c.num_clusters == 6


def test_kmeans_two_separated_pairs():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]])
    c = kmeans_cluster(pts, 2, seed=1)
    assert c.labels[0] == c.labels[1] != c.labels[2]
    assert c.labels[2] == c.labels[3]


def test_kmeans_deterministic(rng):
    pts = rng.normal(size=(40, 4))
    a = kmeans_cluster(pts, 5, seed=9)
    b = kmeans_cluster(pts, 5, seed=9)
    assert a == b


def test_kmeans_k_exceeding_n_rejected(rng):
    with pytest.raises(ValueError):
        kmeans_cluster(rng.normal(size=(3, 2)), 4, seed=0)


# ---------------------------------------------------------------------------
# mixture initialization

def test_init_mixture_single_cluster():
    pts = np.array([[0.0, 0.0], [2.0, 2.0]])
    gm = init_mixture(pts, Clustering(np.array([0, 0]), "entity"))
    assert np.allclose(gm.means[0], [1.0, 1.0])
    assert np.allclose(np.exp(gm.log_vars[0]), [1.0, 1.0])
    assert np.allclose(gm.pi, [1.0])


def test_init_mixture_singletons_floor(rng):
    pts = rng.normal(size=(4, 3))
    gm = init_mixture(pts, Clustering(np.arange(4), "entity"), var_floor=1e-4)
    assert np.allclose(gm.means, pts)
    assert np.allclose(np.exp(gm.log_vars), 1e-4)
    assert np.allclose(gm.pi, 0.25)


def test_init_mixture_weighted_mean_identity(rng):
    pts = rng.normal(size=(30, 4))
    labels = rng.integers(0, 5, size=30)
    c = Clustering(np.unique(labels, return_inverse=True)[1], "entity")
    gm = init_mixture(pts, c)
    recon = (gm.pi[:, None] * gm.means).sum(axis=0)
    assert np.max(np.abs(recon - pts.mean(axis=0))) < 1e-10


def test_mixture_validation():
    with pytest.raises(ValueError):
        GaussianMixture(np.array([0.5, 0.4]), np.zeros((2, 2)), np.zeros((2, 2)))
    gm = GaussianMixture(np.array([1.0]), np.zeros((1, 2)),
                         np.full((1, 2), -50.0))
    assert np.all(gm.log_vars >= -10.0)  # clamped on construction
