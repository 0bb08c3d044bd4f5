"""Pure numpy implementations of the selection kernels.

Same signatures and bit-identical results as the compiled ``_kernels``
module. Exact tie handling uses packed int64 keys: the high 32 bits carry
an order-preserving image of the float32 score, the low 32 bits the
complement of the index, so a single ``argpartition`` has no ties.
"""

from __future__ import annotations

import numpy as np

_LOW = np.int64(0xFFFFFFFF)


def _ordered_bits(s: np.ndarray) -> np.ndarray:
    # +0.0 folds -0.0 so equal scores compare equal
    b = (s.astype(np.float32) + np.float32(0.0)).view(np.int32).astype(np.int64)
    return np.where(b < 0, b ^ 0x7FFFFFFF, b)


def _keys(s: np.ndarray, idx: np.ndarray) -> np.ndarray:
    low = np.where(idx > _LOW, 0, _LOW - np.minimum(idx, _LOW))
    return (_ordered_bits(s) << 32) + low


def _select(cand_s: np.ndarray, cand_i: np.ndarray, k: int):
    keys = _keys(cand_s, cand_i)
    n = keys.shape[1]
    if n > k:
        part = np.argpartition(-keys, k - 1, axis=1)[:, :k]
        keys = np.take_along_axis(keys, part, axis=1)
        cand_s = np.take_along_axis(cand_s, part, axis=1)
        cand_i = np.take_along_axis(cand_i, part, axis=1)
    order = np.argsort(-keys, axis=1, kind="stable")
    return np.take_along_axis(cand_s, order, axis=1), np.take_along_axis(cand_i, order, axis=1)


def row_topk_update(scores, col_off, top_s, top_i):
    scores = np.asarray(scores)
    q, c = scores.shape
    k = top_s.shape[1]
    idx = np.broadcast_to(np.arange(col_off, col_off + c, dtype=np.int64), (q, c))
    cand_s = np.concatenate([top_s, scores], axis=1)
    cand_i = np.concatenate([top_i, idx], axis=1)
    top_s[...], top_i[...] = _select(cand_s, cand_i, k)


def col_topk_update(scores, row_off, top_s, top_i):
    scores = np.asarray(scores)
    q, c = scores.shape
    idx = np.broadcast_to(np.arange(row_off, row_off + q, dtype=np.int64), (c, q))
    cand_s = np.concatenate([top_s, scores.T], axis=1)
    cand_i = np.concatenate([top_i, idx], axis=1)
    top_s[...], top_i[...] = _select(cand_s, cand_i, top_s.shape[1])


def merge_topk(dst_s, dst_i, src_s, src_i):
    cand_s = np.concatenate([dst_s, np.asarray(src_s)], axis=1)
    cand_i = np.concatenate([dst_i, np.asarray(src_i)], axis=1)
    dst_s[...], dst_i[...] = _select(cand_s, cand_i, dst_s.shape[1])


def _take_better(dst_s, dst_i, s, i):
    better = (s > dst_s) | ((s == dst_s) & (i < dst_i))
    dst_s[better] = s[better]
    dst_i[better] = i[better]


def margin_argmax_update(scores, row_pen, col_pen, row_off, col_off,
                         row_best_s, row_best_i, col_best_s, col_best_i, do_cols=True):
    m = np.asarray(scores).astype(np.float64) - (row_pen[:, None] + col_pen[None, :])
    q, c = m.shape
    if c:
        arg = np.argmax(m, axis=1)
        _take_better(row_best_s, row_best_i, m[np.arange(q), arg], arg.astype(np.int64) + col_off)
    if do_cols and q:
        arg = np.argmax(m, axis=0)
        _take_better(col_best_s, col_best_i, m[arg, np.arange(c)], arg.astype(np.int64) + row_off)


def merge_best(dst_s, dst_i, src_s, src_i):
    _take_better(dst_s, dst_i, np.asarray(src_s), np.asarray(src_i))
