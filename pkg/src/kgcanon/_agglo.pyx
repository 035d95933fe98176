# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled complete-linkage agglomeration kernel.

Operates on a full symmetric distance matrix. Clusters are identified by
the index of their smallest member; merging pair (a, b) with a < b keeps
slot a. The merge chosen at every step is the active pair minimising the
key (distance, a, b), and merging continues while that distance stays at
or below the threshold. Semantics must stay identical to _agglo_py.
"""

cdef double INF = float("inf")


cdef void _rescan_row(double[:, ::1] dist, unsigned char[::1] active,
                      Py_ssize_t i, Py_ssize_t n,
                      double[::1] nn_dist, long long[::1] nn_idx) nogil:
    cdef Py_ssize_t j, best_j = -1
    cdef double d, best_d = INF
    for j in range(n):
        if j == i or not active[j]:
            continue
        d = dist[i, j]
        if d < best_d:
            best_d = d
            best_j = j
    nn_dist[i] = best_d
    nn_idx[i] = best_j


def agglomerate(double[:, ::1] dist, double threshold,
                long long[::1] parent, double[::1] nn_dist,
                long long[::1] nn_idx, unsigned char[::1] active):
    """Run the merge loop in place; fills parent[b] = a for every merge."""
    cdef Py_ssize_t n = dist.shape[0]
    cdef Py_ssize_t i, j, k, a, b, best_i
    cdef Py_ssize_t lo, hi, best_lo, best_hi
    cdef double d, best_d, nd
    cdef long long merges = 0

    for i in range(n):
        parent[i] = i
        active[i] = 1
    with nogil:
        for i in range(n):
            _rescan_row(dist, active, i, n, nn_dist, nn_idx)

        while True:
            best_d = INF
            best_i = -1
            best_lo = -1
            best_hi = -1
            for i in range(n):
                if not active[i] or nn_idx[i] < 0:
                    continue
                d = nn_dist[i]
                if d > best_d:
                    continue
                j = nn_idx[i]
                if i < j:
                    lo = i
                    hi = j
                else:
                    lo = j
                    hi = i
                if (d < best_d
                        or lo < best_lo
                        or (lo == best_lo and hi < best_hi)):
                    best_d = d
                    best_lo = lo
                    best_hi = hi
                    best_i = i
            if best_i < 0 or best_d > threshold:
                break

            a = best_lo
            b = best_hi
            # complete linkage: new distance is the worst of the two
            for k in range(n):
                if not active[k] or k == a or k == b:
                    continue
                nd = dist[a, k]
                if dist[b, k] > nd:
                    nd = dist[b, k]
                dist[a, k] = nd
                dist[k, a] = nd
            active[b] = 0
            parent[b] = a
            merges += 1
            _rescan_row(dist, active, a, n, nn_dist, nn_idx)
            for k in range(n):
                if active[k] and k != a and (nn_idx[k] == a or nn_idx[k] == b):
                    _rescan_row(dist, active, k, n, nn_dist, nn_idx)
    return merges
