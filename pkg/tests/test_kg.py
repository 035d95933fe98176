import numpy as np
import pytest

from kgcanon.errors import DataError, ParseError
from kgcanon.kg import (Clustering, Vocabulary, clustering_from_groups,
                        load_clusters, load_triples, write_clusters)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_triples_basic(tmp_path):
    path = write(tmp_path, "t.tsv",
                 "NBC-TV\thas headquarters in\tNYC\n"
                 "NBC Television\tis in\tNew York City\n")
    kg = load_triples(path)
    assert len(kg) == 2
    assert len(kg.entity_vocab) == 4
    assert len(kg.relation_vocab) == 2
    assert kg.entity_vocab.surface(0) == "NBC-TV"
    assert kg.entity_vocab.lookup("NYC") == 1  # head processed before tail


def test_load_triples_self_loop(tmp_path):
    kg = load_triples(write(tmp_path, "t.tsv", "a\tr\ta\n"))
    assert len(kg.entity_vocab) == 1
    assert len(kg.relation_vocab) == 1
    assert kg.triples[0].head == kg.triples[0].tail == 0


def test_load_triples_malformed_line(tmp_path):
    path = write(tmp_path, "t.tsv", "a\tr\tb\nc\td\n")
    with pytest.raises(ParseError) as err:
        load_triples(path)
    assert err.value.line == 2


def test_load_triples_empty_file(tmp_path):
    with pytest.raises(DataError):
        load_triples(write(tmp_path, "t.tsv", "\n\n"))


def test_load_triples_deterministic(tmp_path):
    text = "x\tr1\ty\nz\tr2\tx\ny\tr1\tz\n"
    a = load_triples(write(tmp_path, "a.tsv", text))
    b = load_triples(write(tmp_path, "b.tsv", text))
    assert a.entity_vocab == b.entity_vocab
    assert a.triples == b.triples


def test_load_triples_crlf(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_bytes(b"a\tr\tb\r\nc\tr\td\r\n")
    kg = load_triples(path)
    assert kg.entity_vocab.surface_forms == ("a", "b", "c", "d")


def test_load_triples_keeps_duplicates_and_verbatim_forms(tmp_path):
    kg = load_triples(write(tmp_path, "t.tsv",
                            "a \tr\tb\na \tr\tb\nA\tr\tb\n"))
    assert len(kg) == 3  # duplicates kept, trailing space significant
    assert "a " in kg.entity_vocab and "A" in kg.entity_vocab


@pytest.fixture
def four_vocab(tmp_path):
    kg = load_triples(write(tmp_path, "t.tsv",
                            "NBC-TV\thas headquarters in\tNYC\n"
                            "NBC Television\tis in\tNew York City\n"))
    return kg.entity_vocab


def test_load_clusters_basic(tmp_path, four_vocab):
    path = write(tmp_path, "c.tsv", "NYC\tNew York City\nNBC-TV\tNBC Television\n")
    c = load_clusters(path, four_vocab, "entity")
    assert c.num_clusters == 2
    assert c.labels[four_vocab.lookup("NYC")] == c.labels[
        four_vocab.lookup("New York City")]


def test_load_clusters_absent_mentions_are_singletons(tmp_path):
    vocab = Vocabulary(["a", "b", "c"])
    c = load_clusters(write(tmp_path, "c.tsv", ""), vocab, "entity")
    assert c.num_clusters == 3
    assert list(c.labels) == [0, 1, 2]


def test_load_clusters_duplicate_membership(tmp_path, four_vocab):
    path = write(tmp_path, "c.tsv", "NYC\tNBC-TV\nNYC\n")
    with pytest.raises(ParseError):
        load_clusters(path, four_vocab, "entity")


def test_load_clusters_unknown_mention(tmp_path, four_vocab):
    with pytest.raises(ParseError):
        load_clusters(write(tmp_path, "c.tsv", "nope\n"), four_vocab, "entity")


def test_write_clusters_format(tmp_path):
    vocab = Vocabulary(["a", "b", "c"])
    c = Clustering(np.array([0, 0, 1]), "entity")
    path = tmp_path / "out.tsv"
    write_clusters(c, vocab, path)
    assert path.read_text() == "a\tb\nc\n"


def test_write_clusters_singletons(tmp_path):
    vocab = Vocabulary([f"m{i}" for i in range(5)])
    c = Clustering(np.arange(5), "entity")
    path = tmp_path / "out.tsv"
    write_clusters(c, vocab, path)
    assert len(path.read_text().splitlines()) == 5


def test_round_trip_random_clusterings(tmp_path):
    rng = np.random.default_rng(7)
    for trial in range(25):
        n = int(rng.integers(1, 30))
        vocab = Vocabulary([f"m{i}" for i in range(n)])
        raw = rng.integers(0, max(1, n // 2), size=n)
        c = Clustering(np.unique(raw, return_inverse=True)[1], "entity")
        canon = c.canonicalize()
        path = tmp_path / f"rt{trial}.tsv"
        write_clusters(canon, vocab, path)
        assert load_clusters(path, vocab, "entity") == canon


def test_partition_property():
    groups = [[0, 2], [1]]
    c = clustering_from_groups(groups, 5, "entity")
    members = np.concatenate(c.clusters())
    assert sorted(members.tolist()) == list(range(5))


def test_clustering_rejects_non_dense_labels():
    with pytest.raises(DataError):
        Clustering(np.array([0, 2]), "entity")


def test_head_mentions(tmp_path):
    kg = load_triples(write(tmp_path, "t.tsv", "a\tr\tb\nb\tr\tc\na\tr\tc\n"))
    heads = kg.head_mentions()
    assert {kg.entity_vocab.surface(int(h)) for h in heads} == {"a", "b"}
