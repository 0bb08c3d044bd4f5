"""Exact cosine k-nearest-neighbour search over unit-norm matrices.

Dot products are float64 GEMMs over a fixed grid of canonical tiles
(``QUERY_TILE`` x ``CORPUS_TILE``); the score of any pair is always
produced by the same GEMM call shape at the same position, so results are
bitwise independent of ``block_size`` and ``workers``. Scores are rounded
to float32 once and every later comparison uses those rounded values.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import _backend
from .embed_store import as_array
from .errors import ConfigError

QUERY_TILE = 256
CORPUS_TILE = 2048
MAX_INDEX = 2**32 - 2


@dataclass(frozen=True)
class NeighborTable:
    """Top-k corpus rows per query, ordered by score desc then index asc."""

    k: int
    indices: np.ndarray  # (n, min(k, corpus)) int64
    scores: np.ndarray  # (n, min(k, corpus)) float32

    def __len__(self) -> int:
        return self.indices.shape[0]

    def row(self, i: int) -> list[tuple[int, float]]:
        return [(int(j), float(s)) for j, s in zip(self.indices[i], self.scores[i])]

    def __iter__(self) -> Iterator[list[tuple[int, float]]]:
        for i in range(len(self)):
            yield self.row(i)

    def score_sums(self) -> np.ndarray:
        """Per-row sum of neighbour scores, accumulated left to right in float64."""
        total = np.zeros(self.scores.shape[0], dtype=np.float64)
        for c in range(self.scores.shape[1]):
            total += self.scores[:, c].astype(np.float64)
        return total


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("MINER_WORKERS")
        workers = int(env) if env else 1
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    return workers


def check_pools(queries, corpus, k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    q = as_array(queries)
    c = as_array(corpus)
    if q.shape[1] != c.shape[1]:
        raise ConfigError(f"dimension mismatch: queries have dim {q.shape[1]}, corpus {c.shape[1]}")
    if c.shape[0] == 0:
        raise ConfigError("corpus is empty")
    if k is not None and k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if max(q.shape[0], c.shape[0]) > MAX_INDEX:
        raise ConfigError("pools larger than 2**32 - 2 rows are not supported")
    return q, c


class TileScanner:
    """Drives canonical score tiles through a kernel backend.

    ``visit(scores, q0, q1, c0, c1, state)`` receives the float32 scores of
    query rows ``q0:q1`` against corpus rows ``c0:c1``.
    """

    def __init__(self, queries: np.ndarray, corpus: np.ndarray,
                 block_size: int | None = None, workers: int | None = None):
        self.q64 = np.ascontiguousarray(queries, dtype=np.float64)
        self.c64 = np.ascontiguousarray(corpus, dtype=np.float64)
        self.n = self.q64.shape[0]
        self.m = self.c64.shape[0]
        self.block_size = QUERY_TILE if block_size is None else int(block_size)
        if self.block_size < 1:
            raise ConfigError(f"block_size must be >= 1, got {block_size}")
        self.workers = resolve_workers(workers)

    def _tiles(self, a: int, b: int):
        t = a // QUERY_TILE
        while t * QUERY_TILE < b:
            t0 = t * QUERY_TILE
            t1 = min(t0 + QUERY_TILE, self.n)
            yield t0, t1, max(a, t0), min(b, t1)
            t += 1

    def _task(self, a: int, b: int, visit: Callable, state) -> None:
        for t0, t1, lo, hi in self._tiles(a, b):
            qt = self.q64[t0:t1]
            for c0 in range(0, self.m, CORPUS_TILE):
                c1 = min(c0 + CORPUS_TILE, self.m)
                tile = np.dot(qt, self.c64[c0:c1].T).astype(np.float32)
                if lo != t0 or hi != t1:
                    tile = np.ascontiguousarray(tile[lo - t0:hi - t0])
                visit(tile, lo, hi, c0, c1, state)

    def run(self, visit: Callable, make_state: Callable[[], object] | None = None) -> list:
        """Run all query blocks; return the per-worker states in worker order."""
        blocks = [(a, min(a + self.block_size, self.n)) for a in range(0, self.n, self.block_size)]
        nw = max(1, min(self.workers, len(blocks)))
        states = [make_state() if make_state else None for _ in range(nw)]

        def work(w: int) -> None:
            for a, b in blocks[w::nw]:
                self._task(a, b, visit, states[w])

        if nw == 1:
            work(0)
        else:
            with ThreadPoolExecutor(max_workers=nw) as pool:
                list(pool.map(work, range(nw)))
        return states


def empty_topk(rows: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    return (np.full((rows, k), -np.inf, dtype=np.float32),
            np.full((rows, k), np.iinfo(np.int64).max, dtype=np.int64))


def topk_scan(queries, corpus, k_rows: int, k_cols: int = 0, *, block_size=None,
              workers=None, backend: str | None = None):
    """Top-k per query row and, when ``k_cols`` > 0, per corpus row, in one pass."""
    q, c = check_pools(queries, corpus)
    kern = _backend.get(backend)
    scan = TileScanner(q, c, block_size, workers)
    row_s, row_i = empty_topk(scan.n, k_rows)

    def make_state():
        return empty_topk(scan.m, k_cols) if k_cols else None

    def visit(tile, q0, q1, c0, c1, state):
        kern.row_topk_update(tile, c0, row_s[q0:q1], row_i[q0:q1])
        if state is not None:
            kern.col_topk_update(tile, q0, state[0][c0:c1], state[1][c0:c1])

    states = scan.run(visit, make_state)
    rows = _table(k_rows, row_s, row_i, scan.m)
    if not k_cols:
        return rows, None
    col_s, col_i = states[0]
    for s, i in states[1:]:
        kern.merge_topk(col_s, col_i, s, i)
    return rows, _table(k_cols, col_s, col_i, scan.n)


def _table(k: int, s: np.ndarray, i: np.ndarray, pool: int) -> NeighborTable:
    keep = min(k, pool)
    return NeighborTable(k, np.ascontiguousarray(i[:, :keep]), np.ascontiguousarray(s[:, :keep]))


def knn(queries, corpus, k: int, *, block_size: int | None = None,
        workers: int | None = None, backend: str | None = None) -> NeighborTable:
    """Exact top-``k`` corpus rows by cosine for every query row."""
    check_pools(queries, corpus, k)
    table, _ = topk_scan(queries, corpus, k, block_size=block_size, workers=workers, backend=backend)
    return table


def _oracle_loop(q: np.ndarray, c: np.ndarray, k: int):
    n, dim = q.shape
    m = c.shape[0]
    kk = min(k, m)
    out_i = np.empty((n, kk), dtype=np.int64)
    out_s = np.empty((n, kk), dtype=np.float32)
    scores = np.empty(m, dtype=np.float32)
    for a in range(n):
        for b in range(m):
            acc = 0.0
            for d in range(dim):
                acc += np.float64(q[a, d]) * np.float64(c[b, d])
            scores[b] = np.float32(acc)
        # stable sort of negated scores keeps ascending index among ties
        order = np.argsort(-scores, kind="mergesort")
        for j in range(kk):
            out_i[a, j] = order[j]
            out_s[a, j] = scores[order[j]]
    return out_i, out_s


try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _oracle_fast = _oracle_loop
else:
    _oracle_fast = _numba.njit(cache=False)(_oracle_loop)


def knn_oracle(queries, corpus, k: int, *, jit: bool = True) -> NeighborTable:
    """Reference triple loop: float64 dot products, full stable sort."""
    q, c = check_pools(queries, corpus, k)
    fn = _oracle_fast if jit else _oracle_loop
    idx, scores = fn(np.ascontiguousarray(q, dtype=np.float32),
                     np.ascontiguousarray(c, dtype=np.float32), k)
    return NeighborTable(k, idx, scores)
