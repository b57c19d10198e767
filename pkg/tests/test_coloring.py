import math

import numpy as np
import pytest

from disclib.coloring import (PipelineTrace, _combine, coloring, dense_coloring, heavy_columns,
                              partial_coloring, phase_cap, random_coloring_checked, round_to_signs,
                              rounding_set, sparse_coloring, walk_threshold)
from disclib.config import SolverConfig, make_rng, spencer_scale
from disclib.core import SetSystemMatrix, discrepancy
from disclib.errors import ColoringFailure

# calibrated: 99th percentile of the walk sits near 0.6 sqrt(ln m ln n) for n in [2^10, 2^14]
K_SPARSE = 1.0
# calibrated: dense +-1 systems at n = 128 land near 1.0-1.6 sqrt(n)
K_DENSE = 3.0


def column_normalized(n, s, r):
    rows = np.concatenate([r.choice(n, s, replace=False) for _ in range(n)])
    cols = np.repeat(np.arange(n), s)
    vals = np.where(r.random(n * s) < 0.5, -1.0, 1.0) / math.sqrt(s)
    return SetSystemMatrix(n, n, rows, cols, vals)


def test_random_checked_examples(rng):
    v, tries = random_coloring_checked(SetSystemMatrix.zeros(2, 3), 0.0, rng, return_tries=True)
    assert tries == 1 and set(v) <= {-1.0, 1.0}
    with pytest.raises(ColoringFailure):
        random_coloring_checked(SetSystemMatrix.identity(1), 0.0, rng, 5)


def test_random_checked_acceptance_rate(rng):
    n = 1024
    A = SetSystemMatrix.from_dense(np.ones((1, n)))
    bound = 10 * math.sqrt(n * math.log(2))
    ok = 0
    for _ in range(1000):
        try:
            random_coloring_checked(A, bound, rng, 1)
            ok += 1
        except ColoringFailure:
            pass
    assert ok / 1000 > 0.99


def test_rounding_is_unbiased(rng):
    target = np.array([0.9, -0.3, 0.0, 0.55, -1.0, 1.0])
    draws = np.array([round_to_signs(target, rng) for _ in range(10 ** 4)])
    assert np.all(np.abs(draws) == 1.0)
    assert np.all(np.abs(draws.mean(axis=0) - target) <= 4 / math.sqrt(10 ** 4))


def test_sparse_examples(rng):
    col = SetSystemMatrix.from_dense([[0.5], [-1.0]])
    v = sparse_coloring(col, rng=rng)
    assert abs(v[0]) == 1 and discrepancy(col, v) == 1.0
    A = SetSystemMatrix.identity(50)
    assert discrepancy(A, sparse_coloring(A, rng=rng)) == 1.0


def test_sparse_walk_stays_below_threshold(rng):
    A = column_normalized(512, 6, rng)
    cfg = SolverConfig()
    v, info = sparse_coloring(A, cfg, rng, return_info=True)
    assert np.all(np.abs(v) == 1.0)
    assert info["max_abs_inner"] <= walk_threshold(A.m, A.n, cfg)


def test_sparse_scaling_fixture():
    n = 4096
    r = np.random.default_rng(n)
    A = column_normalized(n, 8, r)
    d = [np.abs(A.matvec(sparse_coloring(A, SolverConfig(), make_rng(k)))).max() for k in range(100)]
    assert np.percentile(d, 99) <= K_SPARSE * math.log(n)


def test_heavy_column_threshold():
    D = np.zeros((64, 16))
    D[:, 3] = 1.0
    D[np.arange(16), np.arange(16)] = 1.0
    mask = heavy_columns(SetSystemMatrix.from_dense(D), SolverConfig())
    assert mask[3] and mask.sum() == 1


def test_rounding_set_is_closed():
    cfg = SolverConfig()
    thr = 1.0 - 2.0 / cfg.clog(100)
    assert rounding_set(np.array([thr, np.nextafter(thr, 0.0), -thr]), 100, cfg).tolist() == [True, False, True]


def test_partial_zero_matrix(rng):
    res = partial_coloring(SetSystemMatrix.zeros(3, 10), None, SolverConfig(), rng)
    assert res.fixed_count == 10 and res.discrepancy == 0.0


def test_partial_identity(rng):
    cfg = SolverConfig()
    res = partial_coloring(SetSystemMatrix.identity(64), None, cfg, rng)
    assert res.fixed_count >= 64 / cfg.partial_fraction_divisor
    assert res.discrepancy <= 1.0


def test_partial_random_path_for_tall_matrices(rng):
    A = SetSystemMatrix.from_dense((rng.random((17, 4)) < 0.5).astype(float))
    res = partial_coloring(A, None, SolverConfig(), rng)
    assert res.v.is_full()


def test_combine_stays_in_cube(rng):
    for _ in range(200):
        prev = rng.uniform(-1, 1, 20)
        prev[rng.random(20) < 0.3] = 0.0
        vp = rng.uniform(-1, 1, 20)
        ends = rng.random(20) < 0.3
        vp[ends] = np.where(rng.random(ends.sum()) < 0.5, -1.0, 1.0)
        for sigma in (1.0, -1.0):
            out, _ = _combine(prev, 1.0 - np.abs(prev), vp, sigma)
            assert np.abs(out).max() <= 1.0


def test_dense_zero_matrix(rng):
    tr = PipelineTrace()
    v = dense_coloring(SetSystemMatrix.zeros(4, 32), SolverConfig(), rng, trace=tr)
    assert np.all(np.abs(v) == 1) and len(tr.phases) <= 2


def test_dense_identity_decay(rng):
    cfg = SolverConfig()
    tr = PipelineTrace()
    A = SetSystemMatrix.identity(128)
    v = dense_coloring(A, cfg, rng, trace=tr)
    assert discrepancy(A, v) <= cfg.spencer_constant * spencer_scale(128, 128)
    sizes = tr.unfixed_counts()
    partial = [p for p in tr.phases if p.phase == "partial"]
    assert len(partial) <= phase_cap(128, cfg)
    for a, b in zip(sizes, sizes[1:]):
        assert b <= a * (1 - 1 / (2 * cfg.partial_fraction_divisor))


@pytest.mark.slow
def test_dense_beats_random_baseline():
    n = 128
    cfg = SolverConfig()
    ours, base = [], []
    for s in range(50):
        r = np.random.default_rng(500 + s)
        A = SetSystemMatrix.from_dense(np.where(r.random((n, n)) < 0.5, -1.0, 1.0))
        ours.append(discrepancy(A, coloring(A, cfg, make_rng(s), mode="dense")))
        base.append(discrepancy(A, np.where(make_rng(s).random(n) < 0.5, 1.0, -1.0)))
    assert max(ours) <= K_DENSE * math.sqrt(n)
    assert np.median(ours) < np.median(base) <= math.sqrt(2 * n * math.log(2 * n))


def test_auto_routes_tall_to_random(rng):
    A = SetSystemMatrix.from_dense((rng.random((17, 4)) < 0.5).astype(float))
    tr = PipelineTrace()
    v = coloring(A, SolverConfig(), rng, trace=tr)
    assert tr.branch == "random" and np.all(np.abs(v) == 1)


def test_auto_routes_wide_to_sparse(rng):
    A = SetSystemMatrix.from_dense((rng.random((3, 400)) < 0.5).astype(float))
    tr = PipelineTrace()
    coloring(A, SolverConfig(), rng, trace=tr)
    assert tr.branch == "sparse"


def test_split_triangle_inequality(rng):
    n = 96
    D = np.zeros((n, n))
    D[:, :48] = rng.random((n, 48)) < 0.5
    D[np.arange(48, n), np.arange(48, n)] = 1.0
    A = SetSystemMatrix.from_dense(D)
    tr = PipelineTrace()
    v = coloring(A, SolverConfig(), rng, trace=tr)
    assert tr.branch == "split" and np.all(np.abs(v) == 1)
    light = A.col_norms() <= math.sqrt(n) / SolverConfig().clog(n)
    parts = [discrepancy(A.select_columns(np.flatnonzero(mask)), v[mask]) for mask in (light, ~light)]
    assert discrepancy(A, v) <= sum(parts) + 1e-9
    assert tr.phases[0].phase == "sparse"


def test_full_colorings_are_signs():
    r = np.random.default_rng(3)
    A = SetSystemMatrix.from_dense((r.random((40, 40)) < 0.5).astype(float))
    cfg = SolverConfig()
    for mode in ("auto", "dense", "sparse", "random"):
        v = coloring(A, cfg, make_rng(1), mode=mode)
        assert np.all(np.abs(v) == 1.0)
