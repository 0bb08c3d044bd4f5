"""Margin scoring: cosine penalised by the mean similarity of each side's k-neighbourhood.

    margin(x, y) = cos(x, y) - (sum_{z in NN_k(x)} cos(x, z) / 2k
                                + sum_{z in NN_k(y)} cos(y, z) / 2k)

NN_k(x) is drawn from the target pool and NN_k(y) from the source pool.
The divisor stays 2k even when a pool holds fewer than k rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend
from .errors import ConfigError
from .knn import NeighborTable, TileScanner, check_pools, topk_scan


@dataclass(frozen=True)
class MarginParams:
    k: int = 4

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")


@dataclass(frozen=True)
class ScoredCandidates:
    """Best target index and its margin for every source row."""

    best_index: np.ndarray  # int64
    margin: np.ndarray  # float64

    def __len__(self) -> int:
        return self.best_index.shape[0]


def _sum(scores) -> float:
    total = 0.0
    for s in scores:
        total += float(s)
    return total


def margin_score(cos_xy: float, nn_x_scores: Sequence[float], nn_y_scores: Sequence[float], k: int) -> float:
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if len(nn_x_scores) > k or len(nn_y_scores) > k:
        raise ConfigError("neighbourhoods may not hold more than k scores")
    two_k = 2.0 * k
    return float(cos_xy) - (_sum(nn_x_scores) / two_k + _sum(nn_y_scores) / two_k)


def penalties(table: NeighborTable, k: int) -> np.ndarray:
    """Per-row neighbourhood penalty ``sum(scores) / 2k``, summed in table order."""
    return table.score_sums() / (2.0 * k)


@dataclass(frozen=True)
class MarginPasses:
    """Outcome of a two-pass margin scan between a source and a target pool."""

    src_neighbors: NeighborTable  # NN_k of each source row over the target pool
    tgt_neighbors: NeighborTable  # NN_k of each target row over the source pool
    forward: ScoredCandidates  # best target per source row
    backward: ScoredCandidates | None  # best source per target row


def margin_passes(src, tgt, params: MarginParams, *, backward: bool = True,
                  block_size: int | None = None, workers: int | None = None,
                  backend: str | None = None) -> MarginPasses:
    """Neighbourhood pass, then an exact margin-argmax pass over every pair."""
    s, t = check_pools(src, tgt, params.k)
    if s.shape[0] == 0:
        raise ConfigError("source pool is empty")
    k = params.k
    src_nn, tgt_nn = topk_scan(s, t, k, k, block_size=block_size, workers=workers, backend=backend)
    row_pen = penalties(src_nn, k)
    col_pen = penalties(tgt_nn, k)

    kern = _backend.get(backend)
    scan = TileScanner(s, t, block_size, workers)
    fwd_s = np.full(scan.n, -np.inf)
    fwd_i = np.full(scan.n, np.iinfo(np.int64).max, dtype=np.int64)

    def make_state():
        if not backward:
            return None
        return (np.full(scan.m, -np.inf), np.full(scan.m, np.iinfo(np.int64).max, dtype=np.int64))

    dummy_s = np.empty(0)
    dummy_i = np.empty(0, dtype=np.int64)

    def visit(tile, q0, q1, c0, c1, state):
        if state is None:
            cs, ci = dummy_s, dummy_i
        else:
            cs, ci = state[0][c0:c1], state[1][c0:c1]
        kern.margin_argmax_update(tile, row_pen[q0:q1], col_pen[c0:c1], q0, c0,
                                  fwd_s[q0:q1], fwd_i[q0:q1], cs, ci, state is not None)

    states = scan.run(visit, make_state)
    back = None
    if backward:
        bs, bi = states[0]
        for s2, i2 in states[1:]:
            kern.merge_best(bs, bi, s2, i2)
        back = ScoredCandidates(bi, bs)
    return MarginPasses(src_nn, tgt_nn, ScoredCandidates(fwd_i, fwd_s), back)


def score_pairs(src, tgt, params: MarginParams, **kw) -> ScoredCandidates:
    """Forward direction only: each source row's margin-best target."""
    return margin_passes(src, tgt, params, backward=False, **kw).forward


def similarity_search_error(src, refs, params: MarginParams = MarginParams(4), **kw) -> float:
    """Fraction of source rows whose margin-best reference is not the same-index row."""
    s, r = check_pools(src, refs, params.k)
    if s.shape[0] != r.shape[0]:
        raise ConfigError(f"row-count mismatch: {s.shape[0]} sources vs {r.shape[0]} references")
    best = score_pairs(s, r, params, **kw).best_index
    wrong = int(np.count_nonzero(best != np.arange(s.shape[0])))
    return wrong / s.shape[0]
