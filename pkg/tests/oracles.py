"""Brute-force references used only by the tests."""

import math

import numpy as np


def cosine_matrix(src: np.ndarray, tgt: np.ndarray) -> np.ndarray:
    """Every pair's dot product, exactly rounded in float64, then rounded to float32."""
    s = src.astype(np.float64)
    t = tgt.astype(np.float64)
    out = np.empty((s.shape[0], t.shape[0]), dtype=np.float32)
    for i in range(s.shape[0]):
        for j in range(t.shape[0]):
            out[i, j] = np.float32(math.fsum(s[i] * t[j]))
    return out


def topk_sum(row: np.ndarray, k: int) -> float:
    ordered = sorted((float(v) for v in row), reverse=True)[:k]
    total = 0.0
    for v in ordered:
        total += v
    return total


def margin_matrix(src: np.ndarray, tgt: np.ndarray, k: int) -> np.ndarray:
    """All-pairs margins straight from the definition."""
    cos = cosine_matrix(src, tgt)
    sx = [topk_sum(cos[i], k) for i in range(cos.shape[0])]
    sy = [topk_sum(cos[:, j], k) for j in range(cos.shape[1])]
    out = np.empty(cos.shape)
    for i in range(cos.shape[0]):
        for j in range(cos.shape[1]):
            out[i, j] = float(cos[i, j]) - (sx[i] / (2 * k) + sy[j] / (2 * k))
    return out


def best_per_row(m: np.ndarray):
    """Argmax per row, lowest index on ties."""
    idx = np.argmax(m, axis=1)
    return idx, m[np.arange(m.shape[0]), idx]


def brute_mine(src, tgt, k, threshold):
    m = margin_matrix(src, tgt, k)
    fi, fs = best_per_row(m)
    bi, bs = best_per_row(m.T)
    pairs = {}
    for i, (j, s) in enumerate(zip(fi, fs)):
        pairs[(i, int(j))] = max(pairs.get((i, int(j)), -np.inf), float(s))
    for j, (i, s) in enumerate(zip(bi, bs)):
        pairs[(int(i), j)] = max(pairs.get((int(i), j), -np.inf), float(s))
    kept = [(i, j, s) for (i, j), s in pairs.items() if s >= threshold]
    kept.sort(key=lambda a: (-a[2], a[0], a[1]))
    return kept


def planted_pools(rng, n, dim, noise=0.02):
    """Source rows and a row-permuted noisy copy; returns (src, tgt, perm) with tgt[perm[i]] ~ src[i]."""
    src = rng.standard_normal((n, dim))
    src /= np.linalg.norm(src, axis=1, keepdims=True)
    perm = rng.permutation(n)
    tgt = np.empty_like(src)
    tgt[perm] = src + noise * rng.standard_normal((n, dim)) / math.sqrt(dim)
    tgt /= np.linalg.norm(tgt, axis=1, keepdims=True)
    return src.astype(np.float32), tgt.astype(np.float32), perm
