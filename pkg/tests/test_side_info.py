import math

import numpy as np
import pytest

from kgcanon import autodiff as ad
from kgcanon.kg import Vocabulary
from kgcanon.side_info import (SideInfoPair, dedupe_pairs, idf_overlap_pairs,
                               idf_stats, load_imported_clusters, load_pairs,
                               morph_normal_form, morph_pairs,
                               score_imported_clusters, side_info_loss,
                               write_pairs)


def pair_map(pairs):
    return {(p.a, p.b): p.score for p in pairs}


def test_pair_validation():
    with pytest.raises(ValueError):
        SideInfoPair(1, 1, 0.5, "idf")
    with pytest.raises(ValueError):
        SideInfoPair(0, 1, 0.0, "idf")


def test_idf_stats():
    vocab = Vocabulary(["william shakespeare", "shakespeare", "william turner"])
    freq = idf_stats(vocab)
    assert freq == {"william": 2, "shakespeare": 2, "turner": 1}


def test_idf_overlap_worked_example():
    vocab = Vocabulary(["william shakespeare", "shakespeare", "william turner"])
    pairs = pair_map(idf_overlap_pairs(vocab, 0.0))
    # shared mass 1/log(3) over union mass 2/log(3)
    assert abs(pairs[(0, 1)] - 0.5) < 1e-12
    w_w, w_s, w_t = (1 / math.log(3), 1 / math.log(3), 1 / math.log(2))
    assert abs(pairs[(0, 2)] - w_w / (w_w + w_s + w_t)) < 1e-12
    assert (1, 2) not in pairs  # disjoint token sets


def test_idf_identical_token_sets_score_one():
    vocab = Vocabulary(["big cat", "cat big"])
    pairs = pair_map(idf_overlap_pairs(vocab, 0.9))
    assert pairs[(0, 1)] == 1.0


def test_idf_threshold_filters():
    vocab = Vocabulary(["william shakespeare", "shakespeare", "william turner"])
    pairs = idf_overlap_pairs(vocab, 0.4)
    assert {(p.a, p.b) for p in pairs} == {(0, 1)}


def test_idf_scores_in_unit_interval(rng):
    tokens = [f"t{i}" for i in range(12)]
    forms = []
    for i in range(40):
        size = int(rng.integers(1, 4))
        picked = rng.choice(12, size=size, replace=False)
        form = " ".join(tokens[j] for j in picked) + f" u{i}"
        forms.append(form)
    pairs = idf_overlap_pairs(Vocabulary(forms), 0.0)
    for p in pairs:
        assert 0.0 < p.score <= 1.0


def test_morph_normal_form_rules():
    assert morph_normal_form("Apples") == "apple"
    assert morph_normal_form("apple") == "apple"
    assert morph_normal_form("N.Y.C") == "nyc"
    assert morph_normal_form("Shakespeare's  plays") == "shakespeare play"
    assert morph_normal_form("his") == "his"  # too short to singularize


def test_morph_pairs_examples():
    vocab = Vocabulary(["Apples", "apple", "NYC", "N.Y.C", "cat", "dog"])
    pairs = pair_map(morph_pairs(vocab))
    assert pairs == {(0, 1): 1.0, (2, 3): 1.0}


def test_imported_cluster_scores():
    pairs = pair_map(score_imported_clusters([{0, 1}]))
    assert pairs[(0, 1)] == 0.25  # (1/4) e^0

    pairs = pair_map(score_imported_clusters([{0, 1}, {1, 2}]))
    # mention 1 sits in two clusters: (1/4) e^{-1}
    assert abs(pairs[(0, 1)] - 0.25 * math.exp(-1)) < 1e-12
    assert abs(pairs[(1, 2)] - 0.25 * math.exp(-1)) < 1e-12


def test_imported_cluster_size_monotonicity():
    small = pair_map(score_imported_clusters([{0, 1}]))[(0, 1)]
    large = pair_map(score_imported_clusters([{0, 1, 2, 3}]))[(0, 1)]
    assert large < small


def test_imported_duplicate_keeps_max():
    pairs = pair_map(score_imported_clusters([{0, 1}, {0, 1, 2}]))
    # both mentions ambiguous in the pair from the small cluster
    assert abs(pairs[(0, 1)] - 0.25 * math.exp(-2)) < 1e-12


def test_dedupe_orders_and_keeps_max():
    raw = [SideInfoPair(3, 1, 0.2, "idf"), SideInfoPair(1, 3, 0.9, "morph")]
    out = dedupe_pairs(raw)
    assert len(out) == 1 and out[0].a == 1 and out[0].b == 3
    assert out[0].score == 0.9


def test_side_info_loss_values(rng):
    lookup = ad.Tensor(np.zeros((3, 4)))
    lookup.data[1, 0] = 1.0
    pairs = [SideInfoPair(0, 1, 1.0, "idf")]
    loss = side_info_loss(pairs, lookup)
    assert abs(loss.item() - 1.0 / 4.0) < 1e-12  # mean-per-dimension MSE

    same = [SideInfoPair(0, 2, 1.0, "idf")]  # identical rows
    assert side_info_loss(same, lookup).item() == 0.0

    halved = [SideInfoPair(0, 1, 0.5, "idf")]
    assert abs(side_info_loss(halved, lookup).item() - 0.125) < 1e-12


def test_side_info_loss_gradient(rng):
    from conftest import gradcheck

    lookup = ad.Tensor(rng.normal(size=(5, 3)))
    pairs = [SideInfoPair(0, 1, 0.7, "idf"), SideInfoPair(2, 4, 0.3, "morph")]

    def fn():
        return side_info_loss(pairs, lookup)

    assert gradcheck(fn, [lookup], rng) < 1e-4


def test_pairs_file_round_trip(tmp_path):
    vocab = Vocabulary(["aa", "bb", "cc"])
    pairs = [SideInfoPair(0, 1, 0.75, "idf"), SideInfoPair(1, 2, 1.0, "morph")]
    path = tmp_path / "pairs.tsv"
    write_pairs(pairs, vocab, path)
    assert load_pairs(path, vocab) == pairs


def test_imported_clusters_file(tmp_path):
    vocab = Vocabulary(["aa", "bb", "cc"])
    path = tmp_path / "clusters.tsv"
    path.write_text("# source: linker\naa\tbb\tmissing\n\nbb\tcc\n")
    clusters, source = load_imported_clusters(path, vocab)
    assert source == "linker"
    assert clusters == [{0, 1}, {1, 2}]
