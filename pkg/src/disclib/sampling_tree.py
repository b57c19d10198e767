"""Dynamic weighted sampling over a full binary tree of log-weights.

Leaves store ``log2`` of their weight and every internal node stores the
``log2`` of the weight sum below it, so products of many multiplicative
updates never overflow. Parents are combined as ``y + log2(1 + 2^(z - y))``
for heavier child ``y`` and lighter child ``z``; when the children differ
by more than ``2L`` the parent just copies the heavier child. Sampling walks
down from the root and flips a coin with bias ``1 / (1 + 2^(z - y))`` toward
the heavier child, or descends straight to it when the children differ by
more than ``L``.

Storage is float64. The heap layout is 1-based: node ``p`` has children
``2p`` and ``2p + 1``; leaf ``i`` lives at ``size + i``. Index 0 is unused by
the tree and doubles as the generation counter of the batch-update stamps.

The ``_tree_*`` kernels are shared with the minimax solver's compiled loop.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import AllZeroWeights, IndexOutOfBounds, NegativeMultiplier, NegativeWeight

NEG_INF = -np.inf
_INV_LN2 = 1.0 / math.log(2.0)


@njit(cache=True, inline="always")
def _combine(a, b, two_L):
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    d = b - a
    if -d > two_L:
        return a
    return a + np.log1p(np.exp2(d)) * _INV_LN2


@njit(cache=True)
def _tree_build(logw, size, two_L):
    for p in range(size - 1, 0, -1):
        logw[p] = _combine(logw[2 * p], logw[2 * p + 1], two_L)


@njit(cache=True)
def _tree_mult_one(logw, size, i, log_tau, two_L):
    p = size + i
    logw[p] = logw[p] + log_tau
    p >>= 1
    while p >= 1:
        logw[p] = _combine(logw[2 * p], logw[2 * p + 1], two_L)
        p >>= 1


@njit(cache=True)
def _tree_mult_batch(logw, size, leaves, log_taus, count, two_L, stamp, buf):
    """Apply ``count`` leaf updates, then re-derive each dirty ancestor once."""
    for c in range(count):
        p = size + leaves[c]
        logw[p] = logw[p] + log_taus[c]
        buf[c] = p
    if size == 1:
        return
    stamp[0] += 1
    gen = stamp[0]
    cnt = count
    while True:
        new = 0
        for c in range(cnt):
            p = buf[c] >> 1
            if stamp[p] != gen:
                stamp[p] = gen
                buf[new] = p
                new += 1
        for c in range(new):
            p = buf[c]
            logw[p] = _combine(logw[2 * p], logw[2 * p + 1], two_L)
        cnt = new
        if buf[0] == 1:
            break


@njit(cache=True)
def _tree_sample(logw, size, L, us):
    """Walk down from the root using one uniform per level from ``us``."""
    p = 1
    level = 0
    while p < size:
        a = logw[2 * p]
        b = logw[2 * p + 1]
        if a == NEG_INF:
            p = 2 * p + 1
        elif b == NEG_INF:
            p = 2 * p
        elif a - b > L:
            p = 2 * p
        elif b - a > L:
            p = 2 * p + 1
        else:
            p_left = 1.0 / (1.0 + np.exp2(b - a))
            if us[level] < p_left:
                p = 2 * p
            else:
                p = 2 * p + 1
        level += 1
    return p - size


@njit(cache=True)
def _tree_sample_many(logw, size, L, us):
    k = us.shape[0]
    out = np.empty(k, dtype=np.int64)
    for t in range(k):
        out[t] = _tree_sample(logw, size, L, us[t])
    return out


def _leaf_count(m):
    size = 1
    while size < m:
        size *= 2
    return size


class WeightTree:
    """Weighted sampler over ``m`` nonnegative weights with O(log m) updates.

    Parameters
    ----------
    weights : array_like
        Initial nonnegative weights; at least one must be positive.
    precision_bits : int
        ``L`` in the combine/descend shortcuts (default 64).
    """

    def __init__(self, weights, precision_bits: int = 64):
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.size == 0:
            raise AllZeroWeights("no weights given")
        if np.any(np.isnan(w)) or np.any(w < 0):
            raise NegativeWeight("weights must be nonnegative")
        if not np.any(w > 0):
            raise AllZeroWeights("at least one weight must be positive")
        self.m = w.size
        self.size = _leaf_count(self.m)
        self.depth = self.size.bit_length() - 1
        self.L = float(precision_bits)
        self._logw = np.full(2 * self.size, NEG_INF)
        with np.errstate(divide="ignore"):
            self._logw[self.size:self.size + self.m] = np.log2(w)
        _tree_build(self._logw, self.size, 2 * self.L)
        self._stamp = np.zeros(2 * self.size, dtype=np.int64)
        self._buf = np.empty(max(self.m, 1), dtype=np.int64)

    @classmethod
    def from_log2(cls, log_weights, precision_bits: int = 64) -> "WeightTree":
        log_weights = np.asarray(log_weights, dtype=np.float64)
        tree = cls(np.ones(log_weights.size), precision_bits)
        tree.set_log2(log_weights)
        return tree

    # inspection ----------------------------------------------------------

    @property
    def nodes(self) -> np.ndarray:
        """Read-only view of the heap array (index 0 unused)."""
        view = self._logw.view()
        view.setflags(write=False)
        return view

    @property
    def log_weights(self) -> np.ndarray:
        """log2 of the leaf weights (``-inf`` for zero)."""
        return self._logw[self.size:self.size + self.m].copy()

    @property
    def root_log(self) -> float:
        return float(self._logw[1])

    def probabilities(self) -> np.ndarray:
        """Leaf weights normalized by the stored root sum."""
        return np.exp2(self._logw[self.size:self.size + self.m] - self._logw[1])

    def induced_probabilities(self) -> np.ndarray:
        """Exact law of :meth:`sample`, following the descent rule node by node."""
        size = self.size
        prob = np.zeros(2 * size)
        prob[1] = 1.0
        for p in range(1, size):
            if prob[p] == 0.0:
                continue
            a, b = self._logw[2 * p], self._logw[2 * p + 1]
            if a == NEG_INF and b == NEG_INF:
                continue
            if a == NEG_INF or b - a > self.L:
                left = 0.0
            elif b == NEG_INF or a - b > self.L:
                left = 1.0
            else:
                left = 1.0 / (1.0 + 2.0 ** (b - a))
            prob[2 * p] = prob[p] * left
            prob[2 * p + 1] = prob[p] * (1.0 - left)
        return prob[size:size + self.m].copy()

    def node_log_errors(self) -> np.ndarray:
        """Relative error of every internal node against an extended-precision recombination."""
        logw = self._logw.astype(np.longdouble)
        errs = np.zeros(self.size)
        for p in range(1, self.size):
            a, b = logw[2 * p], logw[2 * p + 1]
            hi, lo = max(a, b), min(a, b)
            if hi == -np.inf:
                continue
            exact = hi if lo == -np.inf else hi + np.log1p(np.exp2(lo - hi)) / np.log(np.longdouble(2))
            errs[p] = float(abs(logw[p] - exact) / max(abs(exact), 1.0))
        return errs

    # updates ---------------------------------------------------------------

    def _check_index(self, i):
        if not 0 <= i < self.m:
            raise IndexOutOfBounds(f"leaf {i} outside [0, {self.m})")

    def mult(self, i: int, tau: float) -> None:
        """Multiply the weight of leaf ``i`` by ``tau >= 0``."""
        i = int(i)
        self._check_index(i)
        tau = float(tau)
        if not tau >= 0:
            raise NegativeMultiplier(f"multiplier {tau} is negative")
        old = self._logw[self.size + i]
        log_tau = math.log2(tau) if tau > 0 else NEG_INF
        _tree_mult_one(self._logw, self.size, i, log_tau, 2 * self.L)
        if self._logw[1] == NEG_INF:
            self._logw[self.size + i] = old
            _tree_mult_one(self._logw, self.size, i, 0.0, 2 * self.L)
            raise AllZeroWeights("update would zero every weight")

    def mult_many(self, indices, taus) -> None:
        """Apply several :meth:`mult` updates at once (indices must be distinct)."""
        idx = np.asarray(indices, dtype=np.int64).ravel()
        taus = np.asarray(taus, dtype=np.float64).ravel()
        if idx.size != taus.size:
            raise ValueError("indices and multipliers differ in length")
        if idx.size == 0:
            return
        if idx.min() < 0 or idx.max() >= self.m:
            raise IndexOutOfBounds("leaf index out of range")
        if np.any(np.isnan(taus)) or np.any(taus < 0):
            raise NegativeMultiplier("multipliers must be nonnegative")
        if np.unique(idx).size != idx.size:
            raise ValueError("indices must be distinct")
        old = self._logw[self.size + idx].copy()
        with np.errstate(divide="ignore"):
            log_taus = np.log2(taus)
        if idx.size > self._buf.size:
            self._buf = np.empty(idx.size, dtype=np.int64)
        _tree_mult_batch(self._logw, self.size, idx, log_taus, idx.size, 2 * self.L, self._stamp, self._buf)
        if self._logw[1] == NEG_INF:
            self._logw[self.size + idx] = old
            _tree_build(self._logw, self.size, 2 * self.L)
            raise AllZeroWeights("update would zero every weight")

    def mult_all_log2(self, log_factors) -> None:
        """Multiply every leaf ``i`` by ``2 ** log_factors[i]`` and rebuild (O(m))."""
        log_factors = np.asarray(log_factors, dtype=np.float64)
        if log_factors.shape != (self.m,):
            raise ValueError(f"expected {self.m} factors")
        if np.any(np.isnan(log_factors)) or np.any(log_factors == np.inf):
            raise NegativeMultiplier("log factors must be finite or -inf")
        self.set_log2(self._logw[self.size:self.size + self.m] + log_factors)

    def set_log2(self, log_weights) -> None:
        log_weights = np.asarray(log_weights, dtype=np.float64)
        if log_weights.shape != (self.m,):
            raise ValueError(f"expected {self.m} log weights")
        if not np.any(log_weights > NEG_INF):
            raise AllZeroWeights("at least one weight must be positive")
        self._logw[self.size:self.size + self.m] = log_weights
        _tree_build(self._logw, self.size, 2 * self.L)

    # sampling --------------------------------------------------------------

    def sample(self, rng: np.random.Generator) -> int:
        if self._logw[1] == NEG_INF:
            raise AllZeroWeights("cannot sample from all-zero weights")
        us = rng.random(max(self.depth, 1))
        return int(_tree_sample(self._logw, self.size, self.L, us))

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self._logw[1] == NEG_INF:
            raise AllZeroWeights("cannot sample from all-zero weights")
        us = rng.random((int(count), max(self.depth, 1)))
        return _tree_sample_many(self._logw, self.size, self.L, us)

    def __len__(self):
        return self.m

    def __repr__(self):
        return f"WeightTree(m={self.m}, L={self.L:g}, root_log2={self.root_log:.6g})"


def initialize(v, precision_bits: int = 64) -> WeightTree:
    return WeightTree(v, precision_bits)
