"""Benchmark the compiled agglomeration kernel against the pure-Python
fallback, verifying both produce identical merges.

Usage: python benchmarks/bench_agglo.py [--sizes 200,500,1000,2000]
"""

import argparse
import time

import numpy as np

from kgcanon.cluster_init import cosine_distances


def run_kernel(kernel, dist, threshold):
    n = dist.shape[0]
    parent = np.empty(n, dtype=np.int64)
    nn_dist = np.empty(n, dtype=np.float64)
    nn_idx = np.empty(n, dtype=np.int64)
    active = np.empty(n, dtype=np.uint8)
    t0 = time.perf_counter()
    kernel.agglomerate(dist, threshold, parent, nn_dist, nn_idx, active)
    return time.perf_counter() - t0, parent


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="200,500,1000,2000")
    parser.add_argument("--dim", type=int, default=100)
    parser.add_argument("--threshold", type=float, default=0.4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    from kgcanon import _agglo_py
    try:
        from kgcanon import _agglo
    except ImportError:
        _agglo = None
        print("compiled kernel not built; benchmarking the fallback only")

    rng = np.random.default_rng(args.seed)
    print(f"{'n':>6} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        points = rng.normal(size=(n, args.dim))
        dist = cosine_distances(points)
        t_py, parent_py = run_kernel(_agglo_py, dist.copy(), args.threshold)
        if _agglo is None:
            print(f"{n:>6} {t_py:>9.3f}s {'-':>10} {'-':>8}")
            continue
        t_c, parent_c = run_kernel(_agglo, dist.copy(), args.threshold)
        assert np.array_equal(parent_py, parent_c), "kernels diverged"
        print(f"{n:>6} {t_py:>9.3f}s {t_c:>9.3f}s {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
