"""Weighted mention-equivalence constraints and their training loss.

Three generators: inverse-document-frequency token overlap, morphological
normalization, and scoring of externally produced (possibly overlapping)
cluster files. Pairs feed an MSE penalty tying the lookup rows of
equivalent mentions together.

Pairs file format: ``a \\t b \\t score \\t source`` with surface forms.
Imported clusters file: one cluster per line, members tab-separated;
lines starting with ``# source:`` set the source tag.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import ParseError
from .kg import Vocabulary

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class SideInfoPair:
    a: int
    b: int
    score: float
    source: str

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("a pair must relate two distinct mentions")
        if not 0.0 < self.score <= 1.0:
            raise ValueError(f"pair score must lie in (0, 1], got {self.score}")


def dedupe_pairs(pairs: Iterable[SideInfoPair]) -> list[SideInfoPair]:
    """Canonical order (a < b) and max score per unordered pair."""
    best: dict[tuple[int, int], SideInfoPair] = {}
    for p in pairs:
        a, b = (p.a, p.b) if p.a < p.b else (p.b, p.a)
        key = (a, b)
        cur = best.get(key)
        if cur is None or p.score > cur.score:
            best[key] = SideInfoPair(a, b, p.score, p.source)
    return [best[k] for k in sorted(best)]


def _tokens(surface: str) -> set[str]:
    return set(surface.lower().split())


def idf_stats(vocab: Vocabulary) -> dict[str, int]:
    """Document frequency of each token over the mention vocabulary."""
    freq: dict[str, int] = {}
    for surface in vocab:
        for tok in _tokens(surface):
            freq[tok] = freq.get(tok, 0) + 1
    return freq


def idf_overlap_pairs(vocab: Vocabulary, threshold: float) -> list[SideInfoPair]:
    """Pairs whose shared-token IDF mass covers at least `threshold` of the
    union's mass, with weight 1/log(1 + doc_freq) per token. Candidates come
    from an inverted token index, never from all pairs."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    token_sets = [_tokens(s) for s in vocab]
    freq = idf_stats(vocab)
    weight = {tok: 1.0 / math.log(1.0 + f) for tok, f in freq.items()}

    postings: dict[str, list[int]] = {}
    for i, toks in enumerate(token_sets):
        for tok in toks:
            postings.setdefault(tok, []).append(i)

    candidates: set[tuple[int, int]] = set()
    for ids in postings.values():
        for x in range(len(ids)):
            for y in range(x + 1, len(ids)):
                candidates.add((ids[x], ids[y]))

    pairs = []
    for a, b in sorted(candidates):
        ta, tb = token_sets[a], token_sets[b]
        inter = sum(weight[t] for t in ta & tb)
        union = sum(weight[t] for t in ta | tb)
        score = inter / union
        if score >= threshold:
            pairs.append(SideInfoPair(a, b, score, "idf"))
    return dedupe_pairs(pairs)


def morph_normal_form(surface: str) -> str:
    """Lowercase, drop terminal possessive 's, remove punctuation characters,
    singularize a terminal s on tokens of length >= 4, collapse whitespace."""
    out = []
    for tok in surface.lower().split():
        if tok.endswith("'s"):
            tok = tok[:-2]
        tok = tok.translate(_PUNCT_TABLE)
        if len(tok) >= 4 and tok.endswith("s"):
            tok = tok[:-1]
        if tok:
            out.append(tok)
    return " ".join(out)


def morph_pairs(vocab: Vocabulary) -> list[SideInfoPair]:
    """Score-1 pairs between mentions sharing a morphological normal form."""
    groups: dict[str, list[int]] = {}
    for i, surface in enumerate(vocab):
        form = morph_normal_form(surface)
        if form:
            groups.setdefault(form, []).append(i)
    pairs = []
    for members in groups.values():
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                pairs.append(SideInfoPair(members[x], members[y], 1.0, "morph"))
    return dedupe_pairs(pairs)


def score_imported_clusters(clusters: Sequence[set[int]],
                            source: str = "imported") -> list[SideInfoPair]:
    """Pairs within externally produced clusters, scored
    exp(2 - (n_a + n_b)) / |C|^2 where n_x counts the clusters containing x;
    small clusters and unambiguous members score higher."""
    membership: dict[int, int] = {}
    for cluster in clusters:
        for m in cluster:
            membership[m] = membership.get(m, 0) + 1
    pairs = []
    for cluster in clusters:
        if len(cluster) < 2:
            continue
        size2 = float(len(cluster)) ** 2
        members = sorted(cluster)
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                p, q = members[x], members[y]
                score = math.exp(2.0 - (membership[p] + membership[q])) / size2
                pairs.append(SideInfoPair(p, q, min(score, 1.0), source))
    return dedupe_pairs(pairs)


def side_info_loss(pairs: Sequence[SideInfoPair], lookup: ad.Tensor) -> ad.Tensor:
    """Sum over pairs of score * mean-squared difference of the lookup rows."""
    if not pairs:
        return ad.Tensor(0.0)
    a_idx = np.array([p.a for p in pairs], dtype=np.int64)
    b_idx = np.array([p.b for p in pairs], dtype=np.int64)
    scores = np.array([p.score for p in pairs], dtype=np.float64)
    d_in = lookup.shape[1]
    diff = ad.sub(ad.gather_rows(lookup, a_idx), ad.gather_rows(lookup, b_idx))
    per_pair = ad.tsum(ad.square(diff), axis=1)  # (P,)
    return ad.tsum(ad.mul(per_pair, scores / d_in))


# ---------------------------------------------------------------------------
# pair / cluster files

def write_pairs(pairs: Sequence[SideInfoPair], vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(f"{vocab.surface(p.a)}\t{vocab.surface(p.b)}"
                    f"\t{p.score!r}\t{p.source}\n")


def load_pairs(path, vocab: Vocabulary) -> list[SideInfoPair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").removesuffix("\r")
            if line == "" or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ParseError("expected 4 tab-separated fields",
                                 path=path, line=lineno)
            a, b, score, source = fields
            try:
                pairs.append(SideInfoPair(vocab.lookup(a), vocab.lookup(b),
                                          float(score), source))
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
    return dedupe_pairs(pairs)


def load_imported_clusters(path, vocab: Vocabulary) -> tuple[list[set[int]], str]:
    """Read a clusters file of surface forms; returns (clusters, source tag).
    Mentions not present in the vocabulary are skipped (external resources
    routinely cover more surface forms than one KG)."""
    clusters: list[set[int]] = []
    source = "imported"
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.rstrip("\n").removesuffix("\r")
            if line.startswith("# source:"):
                source = line[len("# source:"):].strip() or "imported"
                continue
            if line == "" or line.startswith("#"):
                continue
            members = {vocab.lookup(s) for s in line.split("\t") if s in vocab}
            if members:
                clusters.append(members)
    return clusters, source
