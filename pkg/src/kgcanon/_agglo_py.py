"""Pure-numpy fallback for the compiled agglomeration kernel.

Must stay behaviourally identical to _agglo.pyx: same merge order, same
tie-breaking, same in-place updates. The compiled path only removes the
interpreter overhead of the merge loop.
"""

import numpy as np


def _rescan_row(dist, active, i):
    cand = np.flatnonzero(active)
    cand = cand[cand != i]
    if cand.size == 0:
        return np.inf, -1
    row = dist[i, cand]
    k = int(row.argmin())  # first minimum == smallest j among ties
    return float(row[k]), int(cand[k])


def agglomerate(dist, threshold, parent, nn_dist, nn_idx, active):
    """Run the merge loop in place; fills parent[b] = a for every merge."""
    n = dist.shape[0]
    parent[:] = np.arange(n)
    active[:] = 1
    act = active.view(bool)
    for i in range(n):
        nn_dist[i], nn_idx[i] = _rescan_row(dist, act, i)

    merges = 0
    while True:
        rows = np.flatnonzero(act & (nn_idx >= 0))
        if rows.size == 0:
            break
        d = nn_dist[rows]
        best_d = float(d.min())
        if best_d > threshold:
            break
        tied = rows[d == best_d]
        a, b = min((min(int(i), int(nn_idx[i])), max(int(i), int(nn_idx[i])))
                   for i in tied)

        others = np.flatnonzero(act)
        others = others[(others != a) & (others != b)]
        if others.size:
            nd = np.maximum(dist[a, others], dist[b, others])
            dist[a, others] = nd
            dist[others, a] = nd
        act[b] = False
        parent[b] = a
        merges += 1
        nn_dist[a], nn_idx[a] = _rescan_row(dist, act, a)
        stale = np.flatnonzero(act & ((nn_idx == a) | (nn_idx == b)))
        for k in stale:
            if k != a:
                nn_dist[k], nn_idx[k] = _rescan_row(dist, act, int(k))
    return merges
