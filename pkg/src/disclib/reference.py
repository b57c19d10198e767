"""Brute-force oracles for tests: exhaustive colorings, grid and vertex LPs,
a naive weighted sampler and exact estimator moments.

Nothing here shares code with the solvers it checks beyond the matrix type.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .config import spencer_scale
from .core import SetSystemMatrix
from .errors import AllZeroWeights, NegativeWeight, TooLarge

GRID_POINT_CAP = 10 ** 8
_CHUNK = 1 << 16


@dataclass(frozen=True)
class GridSpec:
    resolution: float
    max_dim: int = 6

    def __post_init__(self):
        if not 0 < self.resolution <= 1:
            raise ValueError("resolution must lie in (0, 1]")

    def axis(self) -> np.ndarray:
        k = int(round(2.0 / self.resolution))
        return np.linspace(-1.0, 1.0, k + 1)

    def size(self, n: int) -> int:
        return self.axis().size ** n

    def check(self, n: int):
        if n > self.max_dim or self.size(n) > GRID_POINT_CAP:
            raise TooLarge(f"grid of {self.axis().size}^{n} points is too large")


def _grid_chunks(axis, n):
    """Yield blocks of grid points of ``axis^n`` in lexicographic order."""
    k = axis.size
    total = k ** n
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        pts = np.empty((idx.size, n))
        for d in range(n - 1, -1, -1):
            pts[:, d] = axis[idx % k]
            idx = idx // k
        yield pts


# discrepancy --------------------------------------------------------------

def brute_min_discrepancy(A: SetSystemMatrix):
    """Exact ``min ||Av||_inf`` over ``v in {-1, 1}^n`` and a minimizer (``n <= 20``)."""
    n = A.n
    if n > 20:
        raise TooLarge("exhaustive search is limited to n <= 20")
    if n == 0:
        return 0.0, np.zeros(0)
    D = A.to_dense()
    best, arg = math.inf, None
    # v and -v give the same discrepancy, so fix v_0 = +1
    free = n - 1
    for start in range(0, 1 << free, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, 1 << free))
        bits = (codes[:, None] >> np.arange(free)) & 1
        V = np.ones((codes.size, n))
        V[:, 1:] = 1.0 - 2.0 * bits
        vals = np.abs(V @ D.T).max(axis=1) if A.m else np.zeros(codes.size)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, arg = float(vals[k]), V[k].copy()
    return best, arg


# linear programs ----------------------------------------------------------

def grid_lp_max(A: SetSystemMatrix, v, C: float, spec: GridSpec = GridSpec(0.1), *, return_bound=False):
    """``max <v, x> / sqrt(n)`` over grid points of the cube lying in ``Gamma_{A,C}``.

    A lower bound on the supremum. With ``return_bound`` also returns
    ``||v||_1 * resolution / sqrt(n)``, the rounding error of an unconstrained optimum.
    """
    v = np.asarray(v, dtype=np.float64)
    n = A.n
    spec.check(n)
    c = C * spencer_scale(n, A.m)
    D = A.to_dense()
    best = -math.inf
    for pts in _grid_chunks(spec.axis(), n):
        ok = np.abs(pts @ D.T).max(axis=1) <= c + 1e-12 if A.m else np.ones(len(pts), bool)
        if ok.any():
            best = max(best, float((pts[ok] @ v).max()))
    value = best / math.sqrt(n)
    if return_bound:
        return value, float(np.abs(v).sum()) * spec.resolution / math.sqrt(n)
    return value


def _vertex_lp(G, h, c, tol=1e-9):
    """``max c^T y`` subject to ``G y <= h`` by enumerating basic solutions.

    The feasible set must be a nonempty polytope, or at least have its
    optimum at a vertex.
    """
    G = np.asarray(G, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    d = G.shape[1]
    best, arg = -math.inf, None
    for rows in itertools.combinations(range(G.shape[0]), d):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        y = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ y <= h + tol * (1.0 + np.abs(h))):
            val = float(c @ y)
            if val > best:
                best, arg = val, y
    return best, arg


def exact_lp_max(A: SetSystemMatrix, v, C: float):
    """Exact ``sup <v, x> / sqrt(n)`` over ``Gamma_{A,C}`` by vertex enumeration (tiny n)."""
    v = np.asarray(v, dtype=np.float64)
    n = A.n
    c = C * spencer_scale(n, A.m)
    D = A.to_dense()
    eye = np.eye(n)
    G = np.vstack([eye, -eye, D, -D])
    h = np.concatenate([np.ones(2 * n), np.full(2 * A.m, c)])
    if math.comb(G.shape[0], n) > 5 * 10 ** 6:
        raise TooLarge("too many candidate vertices")
    val, x = _vertex_lp(G, h, v)
    return val / math.sqrt(n), x


def exact_minimax(v_prime, V):
    """Exact ``min`` over ``[-1/sqrt(n), 1/sqrt(n)]^n`` of ``max_j (v' + V_j)^T x``.

    Solved as the LP ``min t`` s.t. ``(v' + V_j)^T x <= t`` by vertex enumeration.
    """
    v_prime = np.asarray(v_prime, dtype=np.float64)
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    n = v_prime.size
    b = 1.0 / math.sqrt(n)
    W = V + v_prime
    eye = np.eye(n)
    G = np.vstack([np.hstack([W, -np.ones((W.shape[0], 1))]),
                   np.hstack([eye, np.zeros((n, 1))]),
                   np.hstack([-eye, np.zeros((n, 1))])])
    h = np.concatenate([np.zeros(W.shape[0]), np.full(2 * n, b)])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    val, y = _vertex_lp(G, h, c)
    return -val, y[:n]


def grid_minimax(v_prime, V, resolution=1e-3):
    """Grid version of :func:`exact_minimax` (an upper bound; ``n <= 2`` in practice)."""
    v_prime = np.asarray(v_prime, dtype=np.float64)
    W = np.atleast_2d(np.asarray(V, dtype=np.float64)) + v_prime
    n = v_prime.size
    b = 1.0 / math.sqrt(n)
    k = int(round(2.0 / resolution))
    if (k + 1) ** n > GRID_POINT_CAP:
        raise TooLarge("grid too large")
    axis = np.linspace(-b, b, k + 1)
    best = math.inf
    for pts in _grid_chunks(axis, n):
        best = min(best, float((pts @ W.T).max(axis=1).min()))
    return best


def exact_penalized_min(A: SetSystemMatrix, u, delta: float):
    """``min`` over ``[-1, 1]^n`` of ``u^T x + delta ||Ax||_inf``."""
    u = np.asarray(u, dtype=np.float64)
    n = A.n
    D = A.to_dense()
    V = np.vstack([delta * D, -delta * D]) if A.m else np.zeros((1, n))
    # substitute x = sqrt(n) x' to land on the scaled cube
    val, xs = exact_minimax(u, V)
    return val * math.sqrt(n), xs * math.sqrt(n)


# sampling and estimation --------------------------------------------------

def naive_weighted_sample(v, rng: np.random.Generator, size=None):
    """Inverse-transform sampling from the exact cumulative sums of ``v``."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise NegativeWeight("weights must be nonnegative")
    cum = np.cumsum(v)
    if not cum.size or cum[-1] <= 0:
        raise AllZeroWeights("at least one weight must be positive")
    u = rng.random(size) * cum[-1]
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, v.size - 1)


def exact_estimator_moments(x, v):
    """Mean and second moment of the one-sample estimator, summing over all ``n + 1`` outcomes."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    mean = 0.0
    second = 0.0
    for i in range(x.size):
        p = x[i] * x[i]
        if p == 0.0:
            continue
        value = v[i] / x[i]
        mean += p * value
        second += p * value * value
    # the empty outcome contributes value 0 with probability 1 - ||x||^2
    return mean, second


def lra_prefix_regret(vs, xs):
    """Largest prefix regret ``sum_{i<=l} v_i^T x_i - min_{x in cube} sum_{i<=l} v_i^T x``.

    ``xs[i]`` is the point played against loss vector ``vs[i]``; over the
    cube ``[-1/sqrt(n), 1/sqrt(n)]^n`` the best fixed point has loss
    ``-||sum v_i||_1 / sqrt(n)``.
    """
    vs = np.asarray(vs, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    n = vs.shape[1]
    played = np.cumsum(np.einsum("ij,ij->i", vs, xs))
    best_fixed = -np.abs(np.cumsum(vs, axis=0)).sum(axis=1) / math.sqrt(n)
    return float(np.max(played - best_fixed))
