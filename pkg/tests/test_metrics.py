import itertools

import numpy as np
import pytest

from kgcanon.kg import Clustering, clustering_from_groups
from kgcanon.metrics import evaluate


def brute_force_pair_metrics(pred, gold, universe):
    """O(n^2) enumeration of mention pairs."""
    hits = pred_pairs = gold_pairs = 0
    for a, b in itertools.combinations(universe.tolist(), 2):
        same_pred = pred.labels[a] == pred.labels[b]
        same_gold = gold.labels[a] == gold.labels[b]
        pred_pairs += same_pred
        gold_pairs += same_gold
        hits += same_pred and same_gold
    pair_p = 1.0 if pred_pairs == 0 else hits / pred_pairs
    pair_r = 1.0 if gold_pairs == 0 else hits / gold_pairs
    return pair_p, pair_r


def random_clustering(rng, n, max_clusters):
    raw = rng.integers(0, max_clusters, size=n)
    return Clustering(np.unique(raw, return_inverse=True)[1], "entity")


def test_identical_clusterings_score_one(rng):
    c = random_clustering(rng, 40, 6)
    rep = evaluate(c, c)
    for value in rep.as_dict().values():
        assert value == 1.0


def test_worked_example():
    gold = clustering_from_groups([[0, 1], [2]], 3, "entity")
    pred = clustering_from_groups([[0, 1, 2]], 3, "entity")
    rep = evaluate(pred, gold)
    assert rep.macro_p == 0.0
    assert rep.macro_r == 1.0
    assert rep.macro_f1 == 0.0
    assert abs(rep.micro_p - 2 / 3) < 1e-12
    assert rep.micro_r == 1.0
    assert abs(rep.pair_p - 1 / 3) < 1e-12
    assert rep.pair_r == 1.0
    assert abs(rep.pair_f1 - 0.5) < 1e-12


def test_vacuous_pair_precision():
    gold = clustering_from_groups([[0, 1]], 3, "entity")
    pred = Clustering(np.arange(3), "entity")  # all singletons
    rep = evaluate(pred, gold)
    assert rep.pair_p == 1.0
    assert rep.pair_r == 0.0
    assert rep.pair_f1 == 0.0


def test_pairwise_matches_enumeration_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(2, 201))
        pred = random_clustering(rng, n, int(rng.integers(1, 20)))
        gold = random_clustering(rng, n, int(rng.integers(1, 20)))
        size = int(rng.integers(1, n + 1))
        universe = rng.choice(n, size=size, replace=False)
        rep = evaluate(pred, gold, universe)
        pair_p, pair_r = brute_force_pair_metrics(pred, gold, universe)
        assert rep.pair_p == pair_p
        assert rep.pair_r == pair_r


def test_relabeling_invariance(rng):
    n = 60
    pred = random_clustering(rng, n, 8)
    gold = random_clustering(rng, n, 8)
    base = evaluate(pred, gold).as_dict()
    k = pred.num_clusters
    perm = rng.permutation(k)
    relabeled = Clustering(
        np.unique(perm[pred.labels], return_inverse=True)[1], "entity")
    assert evaluate(relabeled, gold).as_dict() == base


def test_pair_symmetry(rng):
    pred = random_clustering(rng, 50, 7)
    gold = random_clustering(rng, 50, 5)
    assert evaluate(pred, gold).pair_p == evaluate(gold, pred).pair_r


def test_mean_f1():
    gold = clustering_from_groups([[0, 1], [2]], 3, "entity")
    pred = clustering_from_groups([[0, 1, 2]], 3, "entity")
    rep = evaluate(pred, gold)
    assert abs(rep.mean_f1 - (rep.macro_f1 + rep.micro_f1 + rep.pair_f1) / 3) < 1e-15


def test_universe_restriction():
    gold = clustering_from_groups([[0, 1], [2, 3]], 4, "entity")
    pred = clustering_from_groups([[0, 1, 2, 3]], 4, "entity")
    rep = evaluate(pred, gold, np.array([0, 1]))
    for value in rep.as_dict().values():
        assert value == 1.0  # restricted to {0, 1} the clusterings agree


def test_universe_out_of_range():
    c = Clustering(np.zeros(3, dtype=np.int64), "entity")
    with pytest.raises(ValueError):
        evaluate(c, c, np.array([5]))


def test_singleton_heavy_macro(rng):
    # singleton predictions are always pure
    gold = random_clustering(rng, 30, 4)
    pred = Clustering(np.arange(30), "entity")
    rep = evaluate(pred, gold)
    assert rep.macro_p == 1.0
