"""Core data model: triples, vocabularies, clusterings, and their files.

File formats:
  * triples: UTF-8 TSV, one ``head \\t relation \\t tail`` per line, no header.
  * clusters: one cluster per line, members tab-separated.
Surface forms are kept verbatim (only the trailing newline is stripped);
mentions are keyed by full surface form, and duplicate triples are kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DataError, ParseError

ENTITY = "entity"
RELATION = "relation"


class Vocabulary:
    """Bijection between surface-form strings and dense integer mention ids."""

    def __init__(self, surface_forms: Iterable[str]):
        self._forms = tuple(surface_forms)
        self._index = {s: i for i, s in enumerate(self._forms)}
        if len(self._index) != len(self._forms):
            raise DataError("vocabulary surface forms are not unique")

    def __len__(self) -> int:
        return len(self._forms)

    def __contains__(self, surface: str) -> bool:
        return surface in self._index

    def __iter__(self):
        return iter(self._forms)

    @property
    def surface_forms(self) -> tuple[str, ...]:
        return self._forms

    def lookup(self, surface: str) -> int:
        try:
            return self._index[surface]
        except KeyError:
            raise DataError(f"unknown mention: {surface!r}") from None

    def surface(self, mention_id: int) -> str:
        return self._forms[mention_id]

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._forms == other._forms

    def __hash__(self):
        return hash(self._forms)


class Triple(NamedTuple):
    head: int
    rel: int
    tail: int


class OpenKG:
    """Multiset of mention triples plus the two id namespaces."""

    def __init__(self, triples: Sequence[Triple], entity_vocab: Vocabulary,
                 relation_vocab: Vocabulary):
        self.triples = list(triples)
        self.entity_vocab = entity_vocab
        self.relation_vocab = relation_vocab
        ne, nr = len(entity_vocab), len(relation_vocab)
        for t in self.triples:
            if not (0 <= t.head < ne and 0 <= t.tail < ne and 0 <= t.rel < nr):
                raise DataError(f"triple {t} outside vocabulary bounds")
        arr = np.asarray(self.triples, dtype=np.int64).reshape(len(self.triples), 3)
        self.heads = arr[:, 0].copy()
        self.rels = arr[:, 1].copy()
        self.tails = arr[:, 2].copy()

    def __len__(self) -> int:
        return len(self.triples)

    def head_mentions(self) -> np.ndarray:
        """Entity ids occurring in head position, ascending, deduplicated."""
        return np.unique(self.heads)


@dataclass(frozen=True)
class Clustering:
    """Partition of one namespace's vocabulary into dense-labelled clusters."""

    labels: np.ndarray  # (n,) int64, values 0..num_clusters-1
    namespace: str

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", lab)
        if lab.size:
            uniq = np.unique(lab)
            if uniq[0] != 0 or uniq[-1] != uniq.size - 1:
                raise DataError("cluster labels must be dense starting at 0")

    @property
    def num_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def clusters(self) -> list[np.ndarray]:
        """Member-id arrays (ascending), indexed by label."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.num_clusters + 1))
        return [np.sort(order[bounds[k]:bounds[k + 1]]) for k in range(self.num_clusters)]

    def canonicalize(self) -> "Clustering":
        """Relabel so clusters are ordered by their smallest member id."""
        mins = {}
        for i, lab in enumerate(self.labels):
            mins.setdefault(int(lab), i)  # first index is the min member
        remap = {lab: rank for rank, (lab, _) in
                 enumerate(sorted(mins.items(), key=lambda kv: kv[1]))}
        return Clustering(np.array([remap[int(l)] for l in self.labels],
                                   dtype=np.int64), self.namespace)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Clustering)
                and self.namespace == other.namespace
                and np.array_equal(self.labels, other.labels))


def clustering_from_groups(groups: Sequence[Sequence[int]], n: int,
                           namespace: str) -> Clustering:
    """Build a Clustering from member-id groups; uncovered ids become
    singletons labelled after the groups, in id order."""
    labels = np.full(n, -1, dtype=np.int64)
    for lab, members in enumerate(groups):
        for m in members:
            if labels[m] != -1:
                raise DataError(f"mention id {m} assigned to two clusters")
            labels[m] = lab
    nxt = len(groups)
    for i in range(n):
        if labels[i] == -1:
            labels[i] = nxt
            nxt += 1
    return Clustering(labels, namespace)


def load_triples(path) -> OpenKG:
    """Read a triples TSV into an OpenKG; vocabularies follow first occurrence."""
    ent_forms: list[str] = []
    ent_index: dict[str, int] = {}
    rel_forms: list[str] = []
    rel_index: dict[str, int] = {}

    def ent_id(s: str) -> int:
        i = ent_index.get(s)
        if i is None:
            i = len(ent_forms)
            ent_index[s] = i
            ent_forms.append(s)
        return i

    def rel_id(s: str) -> int:
        i = rel_index.get(s)
        if i is None:
            i = len(rel_forms)
            rel_index[s] = i
            rel_forms.append(s)
        return i

    triples: list[Triple] = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").removesuffix("\r")
            if line == "":
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}",
                                 path=path, line=lineno)
            triples.append(Triple(ent_id(fields[0]), rel_id(fields[1]),
                                  ent_id(fields[2])))
    if not triples:
        raise DataError(f"no triples in {path}")
    return OpenKG(triples, Vocabulary(ent_forms), Vocabulary(rel_forms))


def load_clusters(path, vocab: Vocabulary, namespace: str) -> Clustering:
    """Read a clusters file; mentions absent from the file become singletons."""
    groups: list[list[int]] = []
    seen: dict[int, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").removesuffix("\r")
            if line == "":
                continue
            members = []
            for surface in line.split("\t"):
                try:
                    mid = vocab.lookup(surface)
                except DataError:
                    raise ParseError(f"unknown mention {surface!r}",
                                     path=path, line=lineno) from None
                if mid in seen:
                    raise ParseError(
                        f"mention {surface!r} already in cluster on line {seen[mid]}",
                        path=path, line=lineno)
                seen[mid] = lineno
                members.append(mid)
            groups.append(members)
    return clustering_from_groups(groups, len(vocab), namespace)


def write_clusters(clustering: Clustering, vocab: Vocabulary, path,
                   include_singletons: bool = True) -> None:
    """Write one line per cluster: members tab-separated and sorted by id,
    lines sorted by smallest member id. Round-trips through load_clusters."""
    if clustering.labels.size != len(vocab):
        raise DataError("clustering does not cover the vocabulary")
    groups = clustering.clusters()
    groups.sort(key=lambda g: int(g[0]))
    with open(path, "w", encoding="utf-8") as f:
        for members in groups:
            if not include_singletons and members.size < 2:
                continue
            f.write("\t".join(vocab.surface(int(m)) for m in members) + "\n")
