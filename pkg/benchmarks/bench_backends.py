"""Compare the compiled kernels with the numpy fallback on the same workload.

    python benchmarks/bench_backends.py --rows 20000 --dim 256

Both backends must produce bitwise-identical neighbour tables and margins.
"""

import argparse
import time

import numpy as np

from marginmine import _backend
from marginmine.knn import topk_scan
from marginmine.margin import MarginParams, margin_passes

from throughput import random_unit


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()

    rng = np.random.default_rng(1)
    src = random_unit(rng, args.rows, args.dim)
    tgt = random_unit(rng, args.rows, args.dim)

    results = {}
    print("backend\tknn_s\tmine_passes_s")
    for name in sorted(_backend.available()):
        t_knn, tables = timed(lambda: topk_scan(src, tgt, args.k, args.k, backend=name), args.repeat)
        t_mine, passes = timed(lambda: margin_passes(src, tgt, MarginParams(args.k), backend=name), args.repeat)
        results[name] = (tables, passes)
        print(f"{name}\t{t_knn:.2f}\t{t_mine:.2f}")

    if len(results) == 2:
        (a, pa), (b, pb) = results["compiled"], results["python"]
        same = (a[0].indices.tobytes() == b[0].indices.tobytes()
                and a[1].scores.tobytes() == b[1].scores.tobytes()
                and pa.forward.margin.tobytes() == pb.forward.margin.tobytes()
                and pa.backward.best_index.tobytes() == pb.backward.best_index.tobytes())
        print(f"bitwise_identical\t{same}")


if __name__ == "__main__":
    main()
