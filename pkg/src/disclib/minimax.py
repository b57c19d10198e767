"""Sublinear primal-dual solver for ``min_{x in cube} max_j (v' + v_j)^T x``.

The cube is ``[-1/sqrt(n), 1/sqrt(n)]^n``. The primal player runs projected
gradient descent (:func:`lra_step`) against one sampled constraint per round;
the dual player keeps multiplicative weights over the constraints in a
:class:`~disclib.sampling_tree.WeightTree` and updates them from a single
importance-sampled coordinate of the current primal point (:func:`estimate`).
Only constraints touching the sampled coordinate are rescaled each round,
so a round costs O(n + k log m) with ``k`` the largest column support.

Sign convention: the dual player maximizes, so a constraint whose estimated
value is large gains weight (factor ``1 + eta v + eta^2 v^2``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import SolverConfig, clamped_log
from .errors import DimensionMismatch, InvalidEpsilon, NormExceeded, NormViolation
from .sampling_tree import WeightTree, _tree_mult_batch, _tree_sample

# +1: dual ascends on large constraint values; -1 reproduces the printed pseudocode
DUAL_SIGN = 1.0

NORM_SLACK = 1e-9


def clip(z: float, c: float) -> float:
    """``min(max(z, -c), c)``."""
    if not c > 0:
        raise ValueError("clip bound must be positive")
    return min(max(z, -c), c)


def dist_sample(x, rng: np.random.Generator, trunc: float = 0.0):
    """Draw ``i`` with probability ``x_i^2``; ``None`` with probability ``1 - ||x||^2``.

    Coordinates with ``|x_i| < trunc`` are never drawn.
    """
    x = np.asarray(x, dtype=np.float64)
    sq = x * x
    if trunc > 0:
        sq[np.abs(x) < trunc] = 0.0
    total = float(sq.sum())
    if total > 1.0 + NORM_SLACK:
        raise NormExceeded(f"||x||^2 = {total} exceeds 1")
    u = rng.random()
    cum = np.cumsum(sq)
    i = int(np.searchsorted(cum, u, side="right"))
    return i if i < x.size else None


def estimate(x, v, rng: np.random.Generator, trunc: float = 0.0) -> float:
    """Unbiased one-sample estimate of ``v^T x`` with second moment ``<= ||v||^2``."""
    i = dist_sample(x, rng, trunc)
    if i is None:
        return 0.0
    return float(v[i] / x[i])


def lra_step(x_prev, v, eta: float) -> np.ndarray:
    """Euclidean projection of ``x_prev - eta * v`` onto the scaled cube."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    bound = 1.0 / math.sqrt(x_prev.size)
    return np.clip(x_prev - eta * np.asarray(v, dtype=np.float64), -bound, bound)


class ConstraintAccessor:
    """Sparse access to constraint vectors ``v_1..v_m``.

    The vectors are the rows of a base matrix scaled by ``scale``. With
    ``mirrored=True`` there are ``2 * base_rows`` constraints: row ``r`` and
    its negation at index ``base_rows + r``. Nothing is materialized.
    """

    def __init__(self, n, base_rows, row_ptr, row_idx, row_val, col_ptr, col_idx, col_val,
                 scale=1.0, mirrored=False, validate=True):
        self.n = int(n)
        self.base_rows = int(base_rows)
        self.row_ptr, self.row_idx, self.row_val = row_ptr, row_idx, row_val
        self.col_ptr, self.col_idx, self.col_val = col_ptr, col_idx, col_val
        self.scale = float(scale)
        self.mirrored = bool(mirrored)
        self.m = self.base_rows * (2 if self.mirrored else 1)
        supports = np.diff(self.col_ptr)
        self.k = int(supports.max()) * (2 if self.mirrored else 1) if supports.size else 0
        if validate:
            sq = np.bincount(np.repeat(np.arange(self.base_rows), np.diff(self.row_ptr)),
                             weights=self.row_val ** 2, minlength=self.base_rows)
            worst = self.scale * math.sqrt(float(sq.max())) if sq.size else 0.0
            if worst > 0.5 + NORM_SLACK:
                raise NormViolation(f"constraint vector norm {worst} exceeds 1/2")

    @classmethod
    def from_matrix(cls, A, scale=1.0, mirrored=False, validate=True):
        return cls(A.n, A.m, A.row_ptr, A.row_idx, A.row_val, A.col_ptr, A.col_idx, A.col_val,
                   scale=scale, mirrored=mirrored, validate=validate)

    @classmethod
    def from_vectors(cls, vectors):
        """Explicit accessor over dense vectors (rows of a 2-D array)."""
        from .core import SetSystemMatrix
        V = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        r, c = np.nonzero(V)
        # entries of explicit constraint vectors are not limited to [-1, 1]
        mat = SetSystemMatrix(V.shape[0], V.shape[1], r, c, V[r, c], validated=True)
        return cls.from_matrix(mat)

    def _base(self, j):
        if not 0 <= j < self.m:
            raise IndexError(f"constraint {j} outside [0, {self.m})")
        if j < self.base_rows:
            return j, self.scale
        return j - self.base_rows, -self.scale

    def row_values(self, j) -> np.ndarray:
        r, s = self._base(j)
        out = np.zeros(self.n)
        lo, hi = self.row_ptr[r], self.row_ptr[r + 1]
        out[self.row_idx[lo:hi]] = s * self.row_val[lo:hi]
        return out

    def column_hits(self, i):
        """``(J, values)`` with ``J = {j : <v_j, e_i> != 0}``."""
        lo, hi = self.col_ptr[i], self.col_ptr[i + 1]
        rows = np.asarray(self.col_idx[lo:hi])
        vals = self.scale * np.asarray(self.col_val[lo:hi])
        if self.mirrored:
            return np.concatenate((rows, rows + self.base_rows)), np.concatenate((vals, -vals))
        return rows.copy(), vals

    def dense(self) -> np.ndarray:
        """Materialize all constraint vectors (for tests and tiny instances only)."""
        return np.array([self.row_values(j) for j in range(self.m)]).reshape(self.m, self.n)


@dataclass
class OptimizeInfo:
    T: int
    eta: float
    eta_lra: float
    tree_updates: int
    min_factor: float
    max_factor: float


def schedule(m: int, eps: float, cfg: SolverConfig):
    """Iteration count and step sizes: ``T = mult * log(m) / eps^2``, ``eta = sqrt(log m / T) / divisor``."""
    log_m = clamped_log(max(m, 1), cfg.log_clamp_floor)
    T = int(math.ceil(cfg.minimax_iter_multiplier * log_m / eps ** 2))
    T = max(1, min(T, cfg.minimax_max_iters))
    eta = math.sqrt(log_m / T) / cfg.minimax_eta_divisor
    return T, eta, math.sqrt(2.0 / T)


@njit(cache=True)
def _optimize_kernel(vprime, r_ptr, r_idx, r_val, c_ptr, c_idx, c_val, base_rows, scale, mirrored,
                     T, eta, eta_lra, trunc, bound, dual_sign,
                     logw, size, L, stamp, leaves, logt, nodes, u_dist, u_tree):
    n = vprime.shape[0]
    x = np.zeros(n)
    y = np.empty(n)
    xsum = np.zeros(n)
    inv_eta = 1.0 / eta
    two_L = 2.0 * L
    updates = 0
    fmin = np.inf
    fmax = -np.inf
    for t in range(T):
        # tau ~ Dist(x, l2)
        u = u_dist[t]
        acc = 0.0
        tau = -1
        for i in range(n):
            xi = x[i]
            if xi >= trunc or xi <= -trunc:
                acc += xi * xi
                if u < acc:
                    tau = i
                    break
        s = _tree_sample(logw, size, L, u_tree[t])
        if tau >= 0:
            xt = x[tau]
            vs = vprime[tau] / xt
            if vs > inv_eta:
                vs = inv_eta
            elif vs < -inv_eta:
                vs = -inv_eta
            fstar = 1.0 + dual_sign * eta * vs + eta * eta * vs * vs
            if fstar < fmin:
                fmin = fstar
            if fstar > fmax:
                fmax = fstar
            cnt = 0
            for p in range(c_ptr[tau], c_ptr[tau + 1]):
                r = c_idx[p]
                a = scale * c_val[p]
                for side in range(2 if mirrored else 1):
                    sgn = 1.0 if side == 0 else -1.0
                    vj = (vprime[tau] + sgn * a) / xt
                    if vj > inv_eta:
                        vj = inv_eta
                    elif vj < -inv_eta:
                        vj = -inv_eta
                    f = 1.0 + dual_sign * eta * vj + eta * eta * vj * vj
                    if f < fmin:
                        fmin = f
                    if f > fmax:
                        fmax = f
                    leaves[cnt] = r + side * base_rows
                    logt[cnt] = np.log2(f / fstar)
                    cnt += 1
            if cnt > 0:
                _tree_mult_batch(logw, size, leaves, logt, cnt, two_L, stamp, nodes)
                updates += cnt
        # primal step against v' + v_s
        for i in range(n):
            y[i] = x[i] - eta_lra * vprime[i]
        if s < 2 * base_rows:
            r = s
            sgn = 1.0
            if r >= base_rows:
                r -= base_rows
                sgn = -1.0
            if r < base_rows:
                for p in range(r_ptr[r], r_ptr[r + 1]):
                    y[r_idx[p]] -= eta_lra * sgn * scale * r_val[p]
        for i in range(n):
            yi = y[i]
            if yi > bound:
                yi = bound
            elif yi < -bound:
                yi = -bound
            x[i] = yi
            xsum[i] += yi
    for i in range(n):
        xsum[i] /= T
    return xsum, updates, fmin, fmax


def _prepare(v_prime, acc, eps):
    v_prime = np.ascontiguousarray(v_prime, dtype=np.float64)
    if v_prime.shape != (acc.n,):
        raise DimensionMismatch(f"v' has shape {v_prime.shape}, expected ({acc.n},)")
    if not 0 < eps < 1:
        raise InvalidEpsilon(f"eps must lie in (0, 1), got {eps}")
    if float(np.linalg.norm(v_prime)) > 0.5 + NORM_SLACK:
        raise NormViolation("||v'||_2 exceeds 1/2")
    return v_prime


def optimize(v_prime, acc: ConstraintAccessor, eps: float, rng: np.random.Generator,
             cfg: SolverConfig | None = None, *, return_info=False):
    """Approximate ``argmin`` over the scaled cube of ``max_j (v' + v_j)^T x``.

    Returns the average of the primal iterates, a point of the scaled cube.
    """
    cfg = cfg or SolverConfig()
    v_prime = _prepare(v_prime, acc, eps)
    n = acc.n
    m_eff = max(acc.m, 1)
    T, eta, eta_lra = schedule(m_eff, eps, cfg)
    tree = WeightTree(np.ones(m_eff))
    u_dist = rng.random(T)
    u_tree = rng.random((T, max(tree.depth, 1)))
    cap = max(acc.k, 1)
    xbar, updates, fmin, fmax = _optimize_kernel(
        v_prime, acc.row_ptr, acc.row_idx, acc.row_val, acc.col_ptr, acc.col_idx, acc.col_val,
        acc.base_rows, acc.scale, acc.mirrored, T, eta, eta_lra, 1e-9 * eps / n, 1.0 / math.sqrt(n),
        DUAL_SIGN, tree._logw, tree.size, tree.L, tree._stamp,
        np.empty(cap, dtype=np.int64), np.empty(cap), np.empty(cap, dtype=np.int64), u_dist, u_tree)
    if updates and not (0.25 <= fmin and fmax <= 3.0):
        raise AssertionError(f"weight multiplier left [1/4, 3]: [{fmin}, {fmax}]")
    bound = 1.0 / math.sqrt(n)
    np.clip(xbar, -bound, bound, out=xbar)
    if return_info:
        return xbar, OptimizeInfo(T, eta, eta_lra, int(updates), float(fmin), float(fmax))
    return xbar


def optimize_reference(v_prime, acc: ConstraintAccessor, eps: float, rng: np.random.Generator,
                       cfg: SolverConfig | None = None, *, dual_sign=DUAL_SIGN, shadow=None):
    """Plain-Python twin of :func:`optimize`, consuming the random stream identically.

    ``shadow``, if a list, receives per-round copies of the tree's normalized
    weights and of the un-ratioed weights updated on every constraint.
    """
    cfg = cfg or SolverConfig()
    v_prime = _prepare(v_prime, acc, eps)
    n = acc.n
    m_eff = max(acc.m, 1)
    T, eta, eta_lra = schedule(m_eff, eps, cfg)
    tree = WeightTree(np.ones(m_eff))
    u_dist = rng.random(T)
    u_tree = rng.random((T, max(tree.depth, 1)))
    trunc = 1e-9 * eps / n
    bound = 1.0 / math.sqrt(n)
    V = acc.dense() if acc.m else np.zeros((1, n))
    full = np.ones(m_eff)
    x = np.zeros(n)
    xsum = np.zeros(n)
    for t in range(T):
        sq = np.where(np.abs(x) >= trunc, x * x, 0.0)
        cum = np.cumsum(sq)
        tau = int(np.searchsorted(cum, u_dist[t], side="right"))
        s = int(_tree_sample(tree._logw, tree.size, tree.L, u_tree[t]))
        if tau < n:
            xt = x[tau]
            vs = clip(v_prime[tau] / xt, 1 / eta)
            fstar = 1.0 + dual_sign * eta * vs + eta * eta * vs * vs
            J, vals = acc.column_hits(tau)
            if J.size:
                vj = np.clip((v_prime[tau] + vals) / xt, -1 / eta, 1 / eta)
                f = 1.0 + dual_sign * eta * vj + eta * eta * vj * vj
                tree.mult_many(J, f / fstar)
            if shadow is not None:
                vall = np.clip((v_prime[tau] + V[:, tau]) / xt, -1 / eta, 1 / eta)
                full = full * (1.0 + dual_sign * eta * vall + eta * eta * vall * vall)
                shadow.append((tree.probabilities(), full / full.sum()))
        y = x - eta_lra * v_prime
        if acc.m:
            r, sc = acc._base(s)
            lo, hi = acc.row_ptr[r], acc.row_ptr[r + 1]
            y[acc.row_idx[lo:hi]] -= eta_lra * (1.0 if sc >= 0 else -1.0) * acc.scale * acc.row_val[lo:hi]
        x = np.clip(y, -bound, bound)
        xsum += x
    return xsum / T


def minimax_objective(v_prime, acc: ConstraintAccessor, x) -> float:
    """``max_j (v' + v_j)^T x`` evaluated exactly (``v'^T x`` when there are no constraints)."""
    x = np.asarray(x, dtype=np.float64)
    base = float(np.dot(v_prime, x))
    if acc.m == 0:
        return base
    from .core import SetSystemMatrix
    mat = SetSystemMatrix(acc.base_rows, acc.n,
                          np.repeat(np.arange(acc.base_rows), np.diff(acc.row_ptr)),
                          acc.row_idx, acc.row_val, validated=True)
    Vx = acc.scale * mat.matvec(x)
    if acc.mirrored:
        Vx = np.concatenate((Vx, -Vx))
    return base + float(Vx.max())
