# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled selection kernels over float32 score tiles.

Every function here has a numpy twin in ``_fallback.py`` with identical
results. Ordering is (score descending, index ascending) everywhere.
"""

from libc.stdlib cimport malloc, free
from libc.stdint cimport int64_t

import numpy as np


cdef inline bint _better(double s, int64_t i, double s2, int64_t i2) noexcept nogil:
    return s > s2 or (s == s2 and i < i2)


cdef inline void _insert(float* bs, int64_t* bi, Py_ssize_t k, float s, int64_t idx) noexcept nogil:
    # caller guarantees (s, idx) beats bs[k-1]
    cdef Py_ssize_t p = k - 1
    while p > 0 and _better(s, idx, bs[p - 1], bi[p - 1]):
        bs[p] = bs[p - 1]
        bi[p] = bi[p - 1]
        p -= 1
    bs[p] = s
    bi[p] = idx


def row_topk_update(const float[:, ::1] scores, Py_ssize_t col_off,
                    float[:, ::1] top_s, int64_t[:, ::1] top_i):
    """Fold every row of ``scores`` into that row's running top-k buffer."""
    cdef Py_ssize_t q = scores.shape[0], c = scores.shape[1], k = top_s.shape[1]
    cdef Py_ssize_t r, j
    cdef float s, ts
    cdef int64_t ti
    cdef const float* row
    cdef float* bs
    cdef int64_t* bi
    with nogil:
        for r in range(q):
            row = &scores[r, 0]
            bs = &top_s[r, 0]
            bi = &top_i[r, 0]
            ts = bs[k - 1]
            ti = bi[k - 1]
            for j in range(c):
                s = row[j]
                if s > ts or (s == ts and col_off + j < ti):
                    _insert(bs, bi, k, s, col_off + j)
                    ts = bs[k - 1]
                    ti = bi[k - 1]


def col_topk_update(const float[:, ::1] scores, Py_ssize_t row_off,
                    float[:, ::1] top_s, int64_t[:, ::1] top_i):
    """Fold every column of ``scores`` into that column's running top-k buffer.

    ``top_s``/``top_i`` hold one buffer per column of ``scores``.
    """
    cdef Py_ssize_t q = scores.shape[0], c = scores.shape[1], k = top_s.shape[1]
    cdef Py_ssize_t r, j
    cdef float s
    cdef int64_t idx
    cdef const float* row
    cdef float* thr_s = <float*> malloc(c * sizeof(float))
    cdef int64_t* thr_i = <int64_t*> malloc(c * sizeof(int64_t))
    if thr_s == NULL or thr_i == NULL:
        free(thr_s)
        free(thr_i)
        raise MemoryError()
    with nogil:
        for j in range(c):
            thr_s[j] = top_s[j, k - 1]
            thr_i[j] = top_i[j, k - 1]
        for r in range(q):
            row = &scores[r, 0]
            idx = row_off + r
            for j in range(c):
                s = row[j]
                if s > thr_s[j] or (s == thr_s[j] and idx < thr_i[j]):
                    _insert(&top_s[j, 0], &top_i[j, 0], k, s, idx)
                    thr_s[j] = top_s[j, k - 1]
                    thr_i[j] = top_i[j, k - 1]
    free(thr_s)
    free(thr_i)


def merge_topk(float[:, ::1] dst_s, int64_t[:, ::1] dst_i,
               const float[:, ::1] src_s, const int64_t[:, ::1] src_i):
    """Merge per-row top-k buffers ``src`` into ``dst`` in place."""
    cdef Py_ssize_t n = dst_s.shape[0], k = dst_s.shape[1], k2 = src_s.shape[1]
    cdef Py_ssize_t r, j
    cdef float s
    cdef int64_t idx
    with nogil:
        for r in range(n):
            for j in range(k2):
                s = src_s[r, j]
                idx = src_i[r, j]
                if _better(s, idx, dst_s[r, k - 1], dst_i[r, k - 1]):
                    _insert(&dst_s[r, 0], &dst_i[r, 0], k, s, idx)


def margin_argmax_update(const float[:, ::1] scores,
                         const double[::1] row_pen, const double[::1] col_pen,
                         Py_ssize_t row_off, Py_ssize_t col_off,
                         double[::1] row_best_s, int64_t[::1] row_best_i,
                         double[::1] col_best_s, int64_t[::1] col_best_i,
                         bint do_cols=True):
    """Track the margin argmax per row and per column of a tile.

    margin = score - (row_pen[r] + col_pen[j])
    """
    cdef Py_ssize_t q = scores.shape[0], c = scores.shape[1]
    cdef Py_ssize_t r, j
    cdef double m, rp, bs
    cdef int64_t bi, ri
    cdef const float* row
    with nogil:
        for r in range(q):
            row = &scores[r, 0]
            rp = row_pen[r]
            bs = row_best_s[r]
            bi = row_best_i[r]
            ri = row_off + r
            for j in range(c):
                m = <double> row[j] - (rp + col_pen[j])
                if m > bs or (m == bs and col_off + j < bi):
                    bs = m
                    bi = col_off + j
                if do_cols:
                    if m > col_best_s[j] or (m == col_best_s[j] and ri < col_best_i[j]):
                        col_best_s[j] = m
                        col_best_i[j] = ri
            row_best_s[r] = bs
            row_best_i[r] = bi


def merge_best(double[::1] dst_s, int64_t[::1] dst_i,
               const double[::1] src_s, const int64_t[::1] src_i):
    cdef Py_ssize_t n = dst_s.shape[0], j
    with nogil:
        for j in range(n):
            if _better(src_s[j], src_i[j], dst_s[j], dst_i[j]):
                dst_s[j] = src_s[j]
                dst_i[j] = src_i[j]
