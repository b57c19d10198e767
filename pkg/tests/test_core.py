import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from disclib.config import SolverConfig, clamped_log, make_rng, spencer_scale, substream
from disclib.core import (ColoringVector, SetSystemMatrix, build_matrix, discrepancy, mat_transpose_vec,
                          mat_vec, matrix_stats, sample_gaussian_conditioned)
from disclib.errors import (DimensionMismatch, DuplicateEntry, EntryOutOfRange, IndexOutOfBounds,
                            RetryExhausted)


@st.composite
def sparse_entries(draw, max_dim=8):
    m = draw(st.integers(1, max_dim))
    n = draw(st.integers(1, max_dim))
    cells = draw(st.sets(st.tuples(st.integers(0, m - 1), st.integers(0, n - 1)), max_size=m * n))
    vals = draw(st.lists(st.floats(-1, 1, allow_nan=False), min_size=len(cells), max_size=len(cells)))
    return m, n, [(r, c, v) for (r, c), v in zip(sorted(cells), vals)]


def test_build_smallest():
    A = build_matrix([(0, 0, 1.0)], 1, 1)
    assert A.nnz == 1 and A.shape == (1, 1)


def test_build_set_indicator():
    A = SetSystemMatrix.from_sets([{0, 1}], 3)
    assert A.to_dense().tolist() == [[1.0, 1.0, 0.0]]


def test_build_rejects_large_entry():
    with pytest.raises(EntryOutOfRange):
        build_matrix([(0, 0, 1.5)], 1, 1)


def test_build_rejects_duplicates_and_bad_indices():
    with pytest.raises(DuplicateEntry):
        build_matrix([(0, 0, 1.0), (0, 0, 0.5)], 1, 1)
    with pytest.raises(IndexOutOfBounds):
        build_matrix([(1, 0, 1.0)], 1, 1)
    with pytest.raises(IndexOutOfBounds):
        build_matrix([(0, -1, 1.0)], 1, 1)


def test_entry_check_is_exact():
    build_matrix([(0, 0, 1.0), (0, 1, -1.0)], 1, 2)
    with pytest.raises(EntryOutOfRange):
        build_matrix([(0, 0, np.nextafter(1.0, 2.0))], 1, 1)
    with pytest.raises(EntryOutOfRange):
        build_matrix([(0, 0, float("nan"))], 1, 1)


def test_matrix_stats_examples():
    one_inf, one_two, sup = matrix_stats(SetSystemMatrix.identity(3))
    assert (one_inf, one_two, sup.tolist()) == (1.0, 1.0, [1, 1, 1])
    _, one_two, _ = matrix_stats(SetSystemMatrix.from_dense(np.ones((2, 2))))
    assert one_two == pytest.approx(math.sqrt(2))
    assert [x if not hasattr(x, "tolist") else x.tolist() for x in matrix_stats(SetSystemMatrix.zeros(2, 2))] \
        == [0.0, 0.0, [0, 0]]


def test_products_examples():
    assert mat_vec(SetSystemMatrix.identity(2), [1, 2]).tolist() == [1, 2]
    assert mat_vec(SetSystemMatrix.zeros(3, 2), [5, 7]).tolist() == [0, 0, 0]
    assert mat_vec(SetSystemMatrix.from_dense([[1, 1]]), [1, -1]).tolist() == [0]
    with pytest.raises(DimensionMismatch):
        mat_vec(SetSystemMatrix.identity(2), [1, 2, 3])
    with pytest.raises(DimensionMismatch):
        mat_transpose_vec(SetSystemMatrix.identity(2), [1])


def test_discrepancy_examples():
    A = SetSystemMatrix.identity(4)
    for v in ([1, 1, 1, 1], [1, -1, 1, -1], [-1, -1, -1, 1]):
        assert discrepancy(A, v) == 1
    row = SetSystemMatrix.from_dense([[1, 1, 1, 1]])
    assert discrepancy(row, [1, 1, -1, -1]) == 0
    assert discrepancy(SetSystemMatrix.from_dense([[1, 1]]), [1, 1]) == 2
    with pytest.raises(DimensionMismatch):
        discrepancy(A, [1, 1])


@given(sparse_entries())
def test_rows_and_columns_agree(data):
    m, n, entries = data
    A = build_matrix(entries, m, n)
    assert A.check_consistency()
    assert set(A.entries()) == set((r, c, v) for r, c, v in entries)
    D = np.zeros((m, n))
    for r, c, v in entries:
        D[r, c] = v
    x = np.linspace(-1, 1, n)
    y = np.linspace(1, -1, m)
    np.testing.assert_allclose(A.matvec(x), D @ x, atol=1e-12)
    np.testing.assert_allclose(A.rmatvec(y), D.T @ y, atol=1e-12)


@given(sparse_entries(), st.integers(0, 2 ** 32))
def test_inf_norm_bound_and_sign_symmetry(data, seed):
    m, n, entries = data
    A = build_matrix(entries, m, n)
    x = np.random.default_rng(seed).standard_normal(n)
    one_inf = matrix_stats(A)[0]
    assert np.abs(A.matvec(x)).max() <= one_inf * np.abs(x).sum() + 1e-12
    assert discrepancy(A, -x) == discrepancy(A, x)


def test_select_and_scale_columns(rng):
    D = np.where(rng.random((5, 6)) < 0.5, 1.0, 0.0)
    A = SetSystemMatrix.from_dense(D)
    cols = [4, 1, 3]
    np.testing.assert_array_equal(A.select_columns(cols).to_dense(), D[:, cols])
    s = np.array([0.5, 0, 1, -1, 0.25, 0])
    B = A.scale_columns(s)
    np.testing.assert_array_equal(B.to_dense(), D * s)
    assert B.nnz == int(np.count_nonzero(D * s))
    with pytest.raises(EntryOutOfRange):
        A.scale_columns(np.full(6, 2.0))


def test_storage_is_read_only():
    A = SetSystemMatrix.identity(3)
    with pytest.raises(ValueError):
        A.row_val[0] = 0.5


def test_matvec_scales_linearly_in_nnz(rng):
    n = 4096
    times = []
    for d in (4, 8):
        rows = rng.integers(0, n, size=n * d)
        cols = np.repeat(np.arange(n), d)
        keys = np.unique(rows * n + cols)
        A = SetSystemMatrix(n, n, keys // n, keys % n, np.ones(keys.size), validated=True)
        x = rng.standard_normal(n)
        A.matvec(x)
        reps = []
        for _ in range(15):
            t = time.perf_counter()
            for _ in range(20):
                A.matvec(x)
            reps.append(time.perf_counter() - t)
        times.append(min(reps))
    assert times[1] / times[0] <= 2.5


def test_coloring_vector_mask():
    cv = ColoringVector([1.0, -1.0, 0.5, -0.999999])
    assert cv.fixed_mask.tolist() == [True, True, False, False]
    assert cv.fixed_count == 2 and not cv.is_full()
    with pytest.raises(EntryOutOfRange):
        ColoringVector([1.5])


def test_gaussian_conditioned_bound_and_moments():
    rng = make_rng(3)
    for _ in range(1000):
        assert abs(sample_gaussian_conditioned(1, rng)[0]) <= 2.0
    draws = np.array([sample_gaussian_conditioned(100, rng) for _ in range(10 ** 4)])
    assert abs(draws.mean()) <= 3 / math.sqrt(10 ** 4 * 100)
    assert np.all(np.einsum("ij,ij->i", draws, draws) <= 400.0)


def test_gaussian_rejection_rate_below_one_percent():
    rng = make_rng(4)
    g = rng.standard_normal((10 ** 4, 100))
    assert np.mean((g * g).sum(axis=1) > 400.0) < 0.01


def test_gaussian_retry_cap():
    class Huge:
        def standard_normal(self, n):
            return np.full(n, 10.0)
    with pytest.raises(RetryExhausted):
        sample_gaussian_conditioned(4, Huge(), max_retries=5)


def test_rng_contract_replay():
    a, b = make_rng(99), make_rng(99)
    assert a.random() == b.random()
    assert a.standard_normal() == b.standard_normal()
    assert a.integers(0, 10 ** 9) == b.integers(0, 10 ** 9)
    sa, sb = substream(a), substream(b)
    assert sa.random() == sb.random()
    assert make_rng(2 ** 64 - 1).random() == make_rng(2 ** 64 - 1).random()


def test_theoretical_schedule():
    cfg = SolverConfig.theoretical()
    n = 4096
    L = cfg.clog(n)
    assert cfg.delta(n) == pytest.approx(1 / L ** 4)
    assert cfg.c0 == 2.0 and not cfg.mwu_adaptive_width
    assert SolverConfig.theoretical(c0=1.5).c0 == 1.5


def test_config_roundtrip_and_validation(tmp_path):
    cfg = SolverConfig(seed=5, c0=0.7)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg
    p = tmp_path / "cfg.json"
    p.write_text('{"retry_count": 3}')
    assert SolverConfig.from_json(p).retry_count == 3
    with pytest.raises(ValueError):
        SolverConfig.from_dict({"nope": 1})
    with pytest.raises(ValueError):
        SolverConfig(mwu_iter_multiplier=0)
    with pytest.raises(ValueError):
        SolverConfig(c0=0)


def test_clamped_log_and_scale():
    assert clamped_log(1.0) == 2.0
    assert clamped_log(math.e ** 5) == pytest.approx(5.0)
    assert SolverConfig().clog(3) == 2.0
    assert spencer_scale(4, 4) == pytest.approx(math.sqrt(4 * math.log(3)))
