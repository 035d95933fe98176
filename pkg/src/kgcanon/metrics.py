"""Macro, micro, and pairwise precision/recall/F1 between two clusterings.

Macro precision is the fraction of predicted clusters fully contained in
some gold cluster; micro precision is element-level purity; pairwise
precision counts co-clustered pairs that are also gold-co-clustered.
Recalls swap the roles. Empty denominators score 1 by convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .kg import Clustering


@dataclass(frozen=True)
class MetricReport:
    macro_p: float
    macro_r: float
    macro_f1: float
    micro_p: float
    micro_r: float
    micro_f1: float
    pair_p: float
    pair_r: float
    pair_f1: float
    mean_f1: float

    FIELD_ORDER = ("macro_p", "macro_r", "macro_f1", "micro_p", "micro_r",
                   "micro_f1", "pair_p", "pair_r", "pair_f1", "mean_f1")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.FIELD_ORDER}


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)


def _restrict(clustering: Clustering, universe: np.ndarray) -> list[set[int]]:
    """Clusters intersected with the universe; empty intersections drop."""
    out: dict[int, set[int]] = {}
    labels = clustering.labels
    for m in universe:
        out.setdefault(int(labels[m]), set()).add(int(m))
    return list(out.values())


def _pair_count(sizes: Iterable[int]) -> int:
    return sum(s * (s - 1) // 2 for s in sizes)


def evaluate(pred: Clustering, gold: Clustering,
             universe: np.ndarray | None = None) -> MetricReport:
    """Score `pred` against `gold` over `universe` (default: all mentions)."""
    if pred.labels.size != gold.labels.size:
        raise ValueError("pred and gold cover different vocabularies")
    if universe is None:
        universe = np.arange(pred.labels.size)
    universe = np.asarray(universe, dtype=np.int64)
    if universe.size and (universe.min() < 0
                          or universe.max() >= pred.labels.size):
        raise ValueError("universe contains ids outside both clusterings")

    pred_clusters = _restrict(pred, universe)
    gold_clusters = _restrict(gold, universe)
    n = int(universe.size)

    # contingency overlaps
    gold_of = {}
    for gi, g in enumerate(gold_clusters):
        for m in g:
            gold_of[m] = gi
    overlap: dict[tuple[int, int], int] = {}
    for pi, p in enumerate(pred_clusters):
        for m in p:
            key = (pi, gold_of[m])
            overlap[key] = overlap.get(key, 0) + 1

    def purity_stats(rows: int, axis: int):
        """(count of pure clusters, summed max overlap) along one side."""
        best = [0] * rows
        touched = [0] * rows
        for key, cnt in overlap.items():
            i = key[axis]
            touched[i] += 1
            if cnt > best[i]:
                best[i] = cnt
        sizes = [len(c) for c in (pred_clusters if axis == 0 else gold_clusters)]
        pure = sum(1 for i in range(rows)
                   if touched[i] == 1 and best[i] == sizes[i])
        return pure, sum(best)

    def ratio(num: float, den: float) -> float:
        return 1.0 if den == 0 else num / den

    pure_pred, hit_pred = purity_stats(len(pred_clusters), 0)
    pure_gold, hit_gold = purity_stats(len(gold_clusters), 1)
    macro_p = ratio(pure_pred, len(pred_clusters))
    macro_r = ratio(pure_gold, len(gold_clusters))
    micro_p = ratio(hit_pred, n)
    micro_r = ratio(hit_gold, n)

    pair_hits = _pair_count(overlap.values())
    pred_pairs = _pair_count(len(c) for c in pred_clusters)
    gold_pairs = _pair_count(len(c) for c in gold_clusters)
    pair_p = ratio(pair_hits, pred_pairs)
    pair_r = ratio(pair_hits, gold_pairs)

    macro_f1 = _f1(macro_p, macro_r)
    micro_f1 = _f1(micro_p, micro_r)
    pair_f1 = _f1(pair_p, pair_r)
    return MetricReport(macro_p, macro_r, macro_f1, micro_p, micro_r, micro_f1,
                        pair_p, pair_r, pair_f1,
                        (macro_f1 + micro_f1 + pair_f1) / 3.0)
