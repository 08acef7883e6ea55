"""Time the numba kernels against their pure-numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is called once before timing so that compilation (or loading
from the numba cache) is excluded. The table reports the best of N runs.
"""
import argparse
import timeit

import numpy as np

from qmn import kernels
from qmn._accel import NUMBA_AVAILABLE


def cases(rng):
    cloud = rng.normal(size=(400, 3))
    other = rng.normal(size=(300, 3))
    small = kernels.canonical_numpy(rng.normal(size=(12, 2)))
    D = kernels.pairwise_numpy(small)
    big = kernels.pairwise_numpy(rng.normal(size=(500, 2)))
    line = np.unique(rng.normal(size=2000))
    vals = np.ascontiguousarray(rng.normal(size=(10, 2000, 1)))
    vec = np.ascontiguousarray(rng.normal(size=(8, 500, 2)))
    idx = np.arange(0, 2000, 2)
    hull = rng.normal(size=(8, 3))
    K, w, Nv = rng.random((600, 600)), rng.random(600), rng.random((20, 600))
    return [
        ("hausdorff 400x300", "hausdorff", (cloud, other)),
        ("min_dist 300 vs 400", "min_dist", (other, cloud)),
        ("exhaustive k=4 n=12", "exhaustive", (D, 4)),
        ("greedy k=8 n=500", "greedy", (big, 8, 0)),
        ("line k=5 n=2000", "line", (line, 5)),
        ("eta_radii scalar 10x2000", "eta_radii", (vals, 2, 14)),
        ("eta_radii vector 8x500", "eta_radii", (vec, 2, 14)),
        ("pair_sup 10 members", "pair_sup", (vals, idx)),
        ("refine 8 points", "refine", (np.full(8, 1 / 8), hull, 0.25, 1e-13, 64)),
        ("quad_apply 600 nodes", "quad_apply", (K, w, Nv)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for label, name, call_args in cases(rng):
        timings = []
        for backend in ("numba", "numpy"):
            fn = getattr(kernels, f"{name}_{backend}")
            fn(*call_args)
            timings.append(min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat)) * 1e3)
        print(f"{label:<28}{timings[0]:>12.3f}{timings[1]:>12.3f}{timings[1] / timings[0]:>9.1f}x")


if __name__ == "__main__":
    main()
