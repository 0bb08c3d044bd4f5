"""Time exact bidirectional mining of two random unit pools.

    python benchmarks/throughput.py --rows 100000 --dim 256 --k 16

Prints one TSV line per metric; peak RSS is the process high-water mark.
"""

import argparse
import os
import resource
import sys
import time

import numpy as np

from marginmine import _backend
from marginmine.margin import MarginParams
from marginmine.miner import MiningConfig, mine


def random_unit(rng, n, dim):
    out = np.empty((n, dim), dtype=np.float32)
    step = 8192
    for a in range(0, n, step):
        x = rng.standard_normal((min(step, n - a), dim))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        out[a:a + step] = x
    return out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=100_000)
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--threshold", type=float, default=1.06)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--backend", default=None)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    src = random_unit(rng, args.rows, args.dim)
    tgt = random_unit(rng, args.rows, args.dim)
    t0 = time.perf_counter()
    aset = mine(src, tgt, MiningConfig(MarginParams(args.k), args.threshold),
                workers=args.workers, backend=args.backend)
    elapsed = time.perf_counter() - t0
    peak_kib = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    name = args.backend or _backend.NAME
    print(f"backend\t{name}")
    print(f"rows\t{args.rows}")
    print(f"dim\t{args.dim}")
    print(f"workers\t{args.workers}")
    print(f"cpus\t{os.cpu_count()}")
    print(f"alignments\t{len(aset)}")
    print(f"seconds\t{elapsed:.2f}")
    print(f"peak_rss_gib\t{peak_kib / 2**20:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
