"""Sparse set-system matrices, products, norms and Gaussian sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatch, DuplicateEntry, EntryOutOfRange,
                     IndexOutOfBounds, RetryExhausted)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class SetSystemMatrix:
    """Immutable sparse m x n matrix with entries in [-1, 1].

    Entries are held twice: row-major (CSR: ``row_ptr``, ``row_idx``,
    ``row_val``) and column-major (CSC: ``col_ptr``, ``col_idx``,
    ``col_val``). Indices inside each row/column are sorted. Construct
    through :func:`build_matrix` or the ``from_*`` helpers.
    """

    __slots__ = ("m", "n", "row_ptr", "row_idx", "row_val", "_row_of",
                 "col_ptr", "col_idx", "col_val", "_col_of")

    def __init__(self, m, n, rows, cols, vals, *, validated=False):
        m, n = int(m), int(n)
        if m < 0 or n < 0:
            raise ValueError("dimensions must be nonnegative")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise DimensionMismatch("rows, cols and vals must have equal length")
        if not validated:
            _validate_entries(rows, cols, vals, m, n)

        order = np.lexsort((cols, rows))
        r, c, v = rows[order], cols[order], vals[order]
        if not validated and r.size > 1:
            dup = (r[1:] == r[:-1]) & (c[1:] == c[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise DuplicateEntry(f"duplicate entry at ({r[k]}, {c[k]})")
        self.m, self.n = m, n
        self.row_ptr = _readonly(np.concatenate(([0], np.cumsum(np.bincount(r, minlength=m)))).astype(np.int64))
        self.row_idx = _readonly(c)
        self.row_val = _readonly(v)
        self._row_of = _readonly(r)

        order = np.lexsort((rows, cols))
        r, c, v = rows[order], cols[order], vals[order]
        self.col_ptr = _readonly(np.concatenate(([0], np.cumsum(np.bincount(c, minlength=n)))).astype(np.int64))
        self.col_idx = _readonly(r)
        self.col_val = _readonly(v)
        self._col_of = _readonly(c)

    # construction -------------------------------------------------------

    @classmethod
    def from_dense(cls, dense) -> "SetSystemMatrix":
        dense = np.atleast_2d(np.asarray(dense, dtype=np.float64))
        r, c = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], r, c, dense[r, c])

    @classmethod
    def from_sets(cls, sets, n) -> "SetSystemMatrix":
        """Incidence matrix of subsets of ``range(n)`` (0-based elements)."""
        rows, cols = [], []
        for i, s in enumerate(sets):
            s = list(s)
            rows.extend([i] * len(s))
            cols.extend(s)
        return cls(len(sets), n, rows, cols, np.ones(len(rows)))

    @classmethod
    def zeros(cls, m, n) -> "SetSystemMatrix":
        return cls(m, n, [], [], [], validated=True)

    @classmethod
    def identity(cls, n) -> "SetSystemMatrix":
        idx = np.arange(n)
        return cls(n, n, idx, idx, np.ones(n), validated=True)

    # views ----------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.row_val.size)

    @property
    def shape(self):
        return (self.m, self.n)

    def row(self, i):
        """(column indices, values) of row ``i``."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.row_idx[lo:hi], self.row_val[lo:hi]

    def col(self, j):
        """(row indices, values) of column ``j``."""
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self.col_idx[lo:hi], self.col_val[lo:hi]

    def entries(self):
        """Entries as (row, col, value) triples in row-major order."""
        return list(zip(self._row_of.tolist(), self.row_idx.tolist(), self.row_val.tolist()))

    def entries_by_cols(self):
        return list(zip(self.col_idx.tolist(), self._col_of.tolist(), self.col_val.tolist()))

    def coo(self):
        """Row-major coordinate arrays (rows, cols, vals)."""
        return self._row_of, self.row_idx, self.row_val

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        out[self._row_of, self.row_idx] = self.row_val
        return out

    def check_consistency(self) -> bool:
        """Full scan: row and column storage describe the same entry set."""
        a = set(self.entries())
        b = set(self.entries_by_cols())
        return a == b and len(a) == self.nnz

    def __eq__(self, other):
        if not isinstance(other, SetSystemMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.row_idx, other.row_idx)
                and np.array_equal(self.row_val, other.row_val))

    __hash__ = None

    def __repr__(self):
        return f"SetSystemMatrix(m={self.m}, n={self.n}, nnz={self.nnz})"

    # derived matrices -----------------------------------------------------

    def select_columns(self, columns) -> "SetSystemMatrix":
        """Restriction to ``columns`` (re-indexed 0..len(columns)-1, in the given order)."""
        columns = np.asarray(columns, dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[columns] = np.arange(columns.size)
        keep = remap[self.row_idx] >= 0
        return SetSystemMatrix(self.m, columns.size, self._row_of[keep],
                               remap[self.row_idx[keep]], self.row_val[keep], validated=True)

    def scale_columns(self, scale) -> "SetSystemMatrix":
        """A @ diag(scale) for ``scale`` in [-1, 1]^n; exact zeros are dropped."""
        scale = np.asarray(scale, dtype=np.float64)
        if scale.shape != (self.n,):
            raise DimensionMismatch(f"expected {self.n} scale factors, got {scale.shape}")
        if np.any(np.abs(scale) > 1):
            raise EntryOutOfRange("column scale factors must lie in [-1, 1]")
        vals = self.row_val * scale[self.row_idx]
        keep = vals != 0
        return SetSystemMatrix(self.m, self.n, self._row_of[keep], self.row_idx[keep],
                               vals[keep], validated=True)

    # products -------------------------------------------------------------

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"expected vector of length {self.n}, got shape {x.shape}")
        return np.bincount(self._row_of, weights=self.row_val * x[self.row_idx], minlength=self.m)

    def rmatvec(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.m,):
            raise DimensionMismatch(f"expected vector of length {self.m}, got shape {y.shape}")
        return np.bincount(self._col_of, weights=self.col_val * y[self.col_idx], minlength=self.n)

    # norms ------------------------------------------------------------------

    def col_supports(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    def row_supports(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def col_norms(self) -> np.ndarray:
        """Euclidean norm of every column."""
        return np.sqrt(np.bincount(self._col_of, weights=self.col_val ** 2, minlength=self.n))

    def row_norms(self) -> np.ndarray:
        return np.sqrt(np.bincount(self._row_of, weights=self.row_val ** 2, minlength=self.m))

    def row_l1_norms(self) -> np.ndarray:
        return np.bincount(self._row_of, weights=np.abs(self.row_val), minlength=self.m)


def _validate_entries(rows, cols, vals, m, n):
    if rows.size == 0:
        return
    bad = (rows < 0) | (rows >= m) | (cols < 0) | (cols >= n)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise IndexOutOfBounds(f"entry ({rows[k]}, {cols[k]}) outside a {m}x{n} matrix")
    bad = ~(np.abs(vals) <= 1.0)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise EntryOutOfRange(f"entry ({rows[k]}, {cols[k]}) has |value| = {abs(vals[k])} > 1")


def build_matrix(entries, m, n) -> SetSystemMatrix:
    """Build a matrix from ``(row, col, value)`` triples.

    Raises ``EntryOutOfRange`` for ``|value| > 1``, ``DuplicateEntry`` for a
    repeated position and ``IndexOutOfBounds`` for indices outside the shape.

    >>> build_matrix([(0, 0, 1.0)], 1, 1).nnz
    1
    """
    entries = list(entries)
    if entries:
        rows, cols, vals = zip(*entries)
    else:
        rows, cols, vals = (), (), ()
    return SetSystemMatrix(m, n, rows, cols, vals)


def matrix_stats(A: SetSystemMatrix):
    """Return ``(||A||_{1->inf}, ||A||_{1->2}, column supports)``.

    ``||A||_{1->inf}`` is the largest absolute entry and ``||A||_{1->2}`` the
    largest column Euclidean norm.
    """
    one_to_inf = float(np.max(np.abs(A.row_val))) if A.nnz else 0.0
    norms = A.col_norms()
    one_to_two = float(norms.max()) if A.n else 0.0
    return one_to_inf, one_to_two, A.col_supports().copy()


def mat_vec(A: SetSystemMatrix, x) -> np.ndarray:
    return A.matvec(x)


def mat_transpose_vec(A: SetSystemMatrix, y) -> np.ndarray:
    return A.rmatvec(y)


def discrepancy(A: SetSystemMatrix, v) -> float:
    """``||A v||_inf`` (0 for a matrix without rows)."""
    Av = A.matvec(v)
    return float(np.max(np.abs(Av))) if Av.size else 0.0


@dataclass
class ColoringVector:
    """A fractional coloring in [-1, 1]^n; coordinate i is fixed iff |v_i| == 1."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise DimensionMismatch("coloring must be a vector")
        if np.any(np.abs(self.values) > 1):
            raise EntryOutOfRange("coloring values must lie in [-1, 1]")

    @property
    def fixed_mask(self) -> np.ndarray:
        return np.abs(self.values) == 1.0

    @property
    def fixed_count(self) -> int:
        return int(np.count_nonzero(self.fixed_mask))

    @property
    def n(self) -> int:
        return self.values.size

    def is_full(self) -> bool:
        return bool(self.fixed_mask.all())


def sample_gaussian_conditioned(n: int, rng: np.random.Generator, max_retries: int = 1000) -> np.ndarray:
    """Standard Gaussian vector conditioned on ``||g||_2 <= 2 sqrt(n)`` (by rejection)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    bound2 = 4.0 * n
    for _ in range(max_retries):
        g = rng.standard_normal(n)
        if float(g @ g) <= bound2:
            return g
    raise RetryExhausted(f"no Gaussian sample with norm <= 2 sqrt(n) in {max_retries} draws")

