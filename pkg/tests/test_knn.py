import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from marginmine import _backend, _fallback
from marginmine.errors import ConfigError
from marginmine.knn import QUERY_TILE, empty_topk, knn, knn_oracle, topk_scan

from .conftest import unit_rows


def assert_tables_equal(a, b, atol=1e-6):
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.scores, b.scores, rtol=0, atol=atol)


def test_self_match(rng, backend):
    corpus = unit_rows(rng, 10, 8)
    table = knn(corpus[3:4], corpus, 4, backend=backend)
    j, s = table.row(0)[0]
    assert j == 3
    assert abs(s - 1.0) <= 1e-6


def test_orthonormal_ties_go_to_lower_index(backend):
    eye = np.eye(3, dtype=np.float32)
    table = knn(eye[:1], eye, 3, backend=backend)
    assert table.row(0) == [(0, 1.0), (1, 0.0), (2, 0.0)]


def test_random_matches_oracle(backend):
    rng = np.random.default_rng(7)
    q, c = unit_rows(rng, 64, 16), unit_rows(rng, 256, 16)
    assert_tables_equal(knn(q, c, 8, backend=backend), knn_oracle(q, c, 8))


def test_k_clamped_to_corpus(backend):
    rng = np.random.default_rng(1)
    q, c = unit_rows(rng, 5, 4), unit_rows(rng, 4, 4)
    for table in (knn(q, c, 10, backend=backend), knn_oracle(q, c, 10)):
        assert table.indices.shape == (5, 4)
        assert table.k == 10


def test_single_pair(backend):
    q = np.array([[0.6, 0.8]], dtype=np.float32)
    c = np.array([[1.0, 0.0]], dtype=np.float32)
    for table in (knn(q, c, 3, backend=backend), knn_oracle(q, c, 3)):
        assert table.indices.tolist() == [[0]]
        assert table.scores[0, 0] == np.float32(0.6)


def test_errors():
    a = np.eye(3, dtype=np.float32)
    with pytest.raises(ConfigError):
        knn(a, np.eye(4, dtype=np.float32), 2)
    with pytest.raises(ConfigError):
        knn(a, np.zeros((0, 3), dtype=np.float32), 2)
    with pytest.raises(ConfigError):
        knn(a, a, 0)
    with pytest.raises(ConfigError):
        knn_oracle(a, a, 0)
    with pytest.raises(ConfigError):
        knn(a, a, 1, block_size=0)
    with pytest.raises(ConfigError):
        knn(a, a, 1, workers=0)


def test_empty_queries(backend):
    table = knn(np.zeros((0, 3), dtype=np.float32), np.eye(3, dtype=np.float32), 2, backend=backend)
    assert table.indices.shape == (0, 2)


@pytest.mark.parametrize("n", [1, 300, 2 * QUERY_TILE + 5])
def test_bitwise_across_blocks_and_workers(backend, n):
    rng = np.random.default_rng(n)
    q, c = unit_rows(rng, n, 24), unit_rows(rng, 2500, 24)
    ref = knn(q, c, 6, backend=backend, block_size=n, workers=1)
    for bs in (1, 7, 64, n):
        for w in (1, 2, 8):
            if bs == 1 and n > 300:
                continue
            t = knn(q, c, 6, backend=backend, block_size=bs, workers=w)
            assert t.indices.tobytes() == ref.indices.tobytes()
            assert t.scores.tobytes() == ref.scores.tobytes()


def test_backends_agree_bitwise():
    if len(_backend.available()) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(3)
    q, c = unit_rows(rng, 200, 12), unit_rows(rng, 3000, 12)
    a, ac = topk_scan(q, c, 9, 5, backend="compiled")
    b, bc = topk_scan(q, c, 9, 5, backend="python")
    assert a.scores.tobytes() == b.scores.tobytes() and a.indices.tobytes() == b.indices.tobytes()
    assert ac.scores.tobytes() == bc.scores.tobytes() and ac.indices.tobytes() == bc.indices.tobytes()


def test_column_table_matches_oracle(backend):
    rng = np.random.default_rng(11)
    q, c = unit_rows(rng, 70, 10), unit_rows(rng, 40, 10)
    _, cols = topk_scan(q, c, 3, 5, backend=backend, workers=3, block_size=16)
    assert_tables_equal(cols, knn_oracle(c, q, 5))


def test_permutation_covariance(backend):
    rng = np.random.default_rng(5)
    q, c = unit_rows(rng, 30, 8), unit_rows(rng, 120, 8)
    perm = rng.permutation(120)
    base = knn(q, c, 7, backend=backend)
    permuted = knn(q, c[perm], 7, backend=backend)
    # row r of c[perm] is original row perm[r]
    np.testing.assert_array_equal(perm[permuted.indices], base.indices)
    np.testing.assert_array_equal(permuted.scores, base.scores)


def test_oracle_pure_python_path_matches_jit():
    rng = np.random.default_rng(9)
    q, c = unit_rows(rng, 6, 5), unit_rows(rng, 11, 5)
    assert_tables_equal(knn_oracle(q, c, 4, jit=False), knn_oracle(q, c, 4), atol=0)


def lattice_rows(draw_rows, n, dim):
    # coarse coordinates create many exact score ties
    x = np.array(draw_rows, dtype=np.float64).reshape(n, dim)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0] = 1
    return (x / norms).astype(np.float32)


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_tie_heavy_inputs_match_oracle(data):
    n = data.draw(st.integers(1, 12))
    m = data.draw(st.integers(1, 20))
    dim = data.draw(st.integers(1, 4))
    k = data.draw(st.integers(1, 25))
    coords = st.integers(-2, 2)
    q = lattice_rows(data.draw(st.lists(coords, min_size=n * dim, max_size=n * dim)), n, dim)
    c = lattice_rows(data.draw(st.lists(coords, min_size=m * dim, max_size=m * dim)), m, dim)
    oracle = knn_oracle(q, c, k)
    for be in _backend.available():
        table = knn(q, c, k, backend=be, block_size=data.draw(st.integers(1, 5)))
        assert_tables_equal(table, oracle)
        ordered = table.scores
        assert np.all(ordered[:, :-1] >= ordered[:, 1:])
        assert np.all(np.abs(ordered) <= 1 + 1e-5)


@pytest.mark.parametrize("name", sorted(_backend.available()))
def test_kernel_merge_topk(name):
    kern = _backend.get(name)
    rng = np.random.default_rng(0)
    a_s, a_i = empty_topk(50, 4)
    b_s, b_i = empty_topk(50, 4)
    scores = np.round(rng.standard_normal((50, 40)), 1).astype(np.float32)
    kern.row_topk_update(np.ascontiguousarray(scores[:, :20]), 0, a_s, a_i)
    kern.row_topk_update(np.ascontiguousarray(scores[:, 20:]), 20, b_s, b_i)
    kern.merge_topk(a_s, a_i, b_s, b_i)
    whole_s, whole_i = empty_topk(50, 4)
    _fallback.row_topk_update(scores, 0, whole_s, whole_i)
    np.testing.assert_array_equal(a_i, whole_i)
    np.testing.assert_array_equal(a_s, whole_s)


@pytest.mark.parametrize("choice,expected", [("python", "python"), ("auto", None)])
def test_backend_selected_at_import(choice, expected):
    import os
    import subprocess
    import sys
    env = dict(os.environ, MARGINMINE_BACKEND=choice)
    out = subprocess.run([sys.executable, "-c", "import marginmine; print(marginmine.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True).stdout.strip()
    if expected is None:
        expected = "compiled" if "compiled" in _backend.available() else "python"
    assert out == expected
