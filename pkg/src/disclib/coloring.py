"""The coloring pipeline.

``coloring`` routes an instance to one of three strategies: a checked
uniformly random coloring when there are very many rows, the online
self-balancing walk when there are few rows or the columns are light, and
the partial-coloring recursion (``dense_coloring``) for the heavy columns.
``partial_coloring`` solves a Gaussian linear program over
``Gamma_{A,C}`` and randomly rounds the near-integral coordinates.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .config import SolverConfig, make_rng, spencer_scale, substream
from .core import ColoringVector, SetSystemMatrix, discrepancy, sample_gaussian_conditioned
from .errors import ColoringFailure, DiscError, RetriesExhausted, WalkOverflow
from .mwu import solve


@dataclass
class PhaseRecord:
    phase: str
    n_sub: int
    m_sub: int
    nnz: int
    disc_contrib: float
    micros: int
    retries: int = 0


@dataclass
class PipelineTrace:
    """Per-phase log of a pipeline run."""

    phases: list = field(default_factory=list)
    branch: str = ""

    def add(self, record: PhaseRecord):
        self.phases.append(record)

    def total_bound(self) -> float:
        """Sum of per-phase contributions; bounds the final discrepancy by the triangle inequality."""
        return float(sum(p.disc_contrib for p in self.phases))

    def unfixed_counts(self):
        return [p.n_sub for p in self.phases if p.phase == "partial"]

    CSV_COLUMNS = ("phase", "n_sub", "m_sub", "nnz", "disc_contrib", "micros", "retries")

    def rows(self):
        return [[getattr(p, c) for c in self.CSV_COLUMNS] for p in self.phases]


@dataclass
class PartialColoringResult:
    v: ColoringVector
    fixed_count: int
    discrepancy: float
    retries: int = 0
    C_alg: float = float("nan")
    heavy_count: int = 0


def _micros(t0):
    return int(round((time.perf_counter() - t0) * 1e6))


def round_to_signs(values, rng: np.random.Generator) -> np.ndarray:
    """Independent ``+-1`` rounding of each coordinate with mean equal to its value."""
    values = np.asarray(values, dtype=np.float64)
    u = rng.random(values.size)
    return np.where(u < 0.5 * (1.0 + values), 1.0, -1.0)


def random_coloring_checked(A: SetSystemMatrix, bound: float, rng: np.random.Generator,
                            max_retries: int = 64, *, offset=None, base=None, return_tries=False):
    """Uniform ``+-1`` coloring with ``||Av||_inf <= bound``, resampled up to ``max_retries`` times.

    With ``base`` (a point of ``[-1, 1]^n``) each coordinate is instead
    rounded with mean ``base_i``, and the check is ``||Av - offset||_inf <= bound``
    where ``offset`` defaults to ``A base``.
    """
    if bound < 0:
        raise ValueError("bound must be nonnegative")
    base = np.zeros(A.n) if base is None else np.asarray(base, dtype=np.float64)
    offset = A.matvec(base) if offset is None else offset
    for tries in range(1, max_retries + 1):
        v = round_to_signs(base, rng)
        dev = A.matvec(v) - offset
        if (float(np.abs(dev).max()) if dev.size else 0.0) <= bound:
            return (v, tries) if return_tries else v
    raise ColoringFailure(f"no coloring within {bound} after {max_retries} tries")


# self-balancing walk --------------------------------------------------------

@njit(cache=True)
def _walk_kernel(col_ptr, col_idx, col_val, m, scale, c, us, v):
    w = np.zeros(m)
    n = col_ptr.shape[0] - 1
    worst = 0.0
    for i in range(n):
        p = 0.0
        for q in range(col_ptr[i], col_ptr[i + 1]):
            p += w[col_idx[q]] * col_val[q]
        p *= scale
        if abs(p) > worst:
            worst = abs(p)
        if abs(p) > c:
            return i, worst
        s = -1.0 if us[i] < 0.5 * (1.0 + p / c) else 1.0
        v[i] = s
        for q in range(col_ptr[i], col_ptr[i + 1]):
            w[col_idx[q]] += s * scale * col_val[q]
    return -1, worst


def walk_threshold(m: int, n: int, cfg: SolverConfig) -> float:
    return cfg.walk_constant * math.log(max(m, 2) * max(n, 2))


def sparse_coloring(A: SetSystemMatrix, cfg: SolverConfig | None = None, rng=None, *, return_info=False):
    """Online self-balancing walk over the columns, in O(nnz + n).

    Columns are scaled by ``1 / ||A||_{1->2}``; column ``i`` gets sign
    ``-1`` with probability ``(1 + <w, a_i> / c) / 2`` where ``w`` is the
    running signed sum. A step with ``|<w, a_i>| > c`` aborts the run,
    which is retried from scratch.
    """
    cfg = cfg or SolverConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    norms = A.col_norms()
    top = float(norms.max()) if norms.size else 0.0
    scale = 1.0 / top if top > 0 else 1.0
    c = walk_threshold(A.m, A.n, cfg)
    v = np.empty(A.n)
    for attempt in range(cfg.walk_retries):
        us = rng.random(A.n)
        stop, worst = _walk_kernel(A.col_ptr, A.col_idx, A.col_val, A.m, scale, c, us, v)
        if stop < 0:
            if return_info:
                return v, {"threshold": c, "max_abs_inner": worst, "retries": attempt}
            return v
    raise WalkOverflow(f"walk exceeded threshold {c} in {cfg.walk_retries} runs")


# partial coloring -------------------------------------------------------------

def heavy_columns(A: SetSystemMatrix, cfg: SolverConfig) -> np.ndarray:
    """Mask of columns with support at least ``L(n) nnz(A) / n``."""
    if A.n == 0:
        return np.zeros(0, dtype=bool)
    return A.col_supports() >= cfg.clog(A.n) * A.nnz / A.n


def rounding_set(z, n: int, cfg: SolverConfig) -> np.ndarray:
    """Coordinates with ``|z_j| >= 1 - 2 / L(n)`` (closed condition)."""
    return np.abs(z) >= 1.0 - 2.0 / cfg.clog(n)


def _partial_once(A: SetSystemMatrix, cfg: SolverConfig, rng):
    n, m = A.n, A.m
    v = np.zeros(n)
    heavy = heavy_columns(A, cfg)
    C_alg = float("nan")
    if heavy.any():
        Ah = A.select_columns(np.flatnonzero(heavy))
        v[heavy] = random_coloring_checked(Ah, cfg.heavy_constant * math.sqrt(n), rng,
                                           cfg.random_coloring_retries)
    light = np.flatnonzero(~heavy)
    if light.size:
        Al = A.select_columns(light)
        g = sample_gaussian_conditioned(light.size, rng, cfg.gaussian_retries)
        C_alg = float(rng.uniform(cfg.c0, 2.0 * cfg.c0))
        z = solve(Al, g, C_alg, cfg, substream(rng))
        T = rounding_set(z, n, cfg)
        z = z.copy()
        z[T] = round_to_signs(z[T], rng)
        v[light] = z
    return v, C_alg, int(heavy.sum())


def partial_coloring(A: SetSystemMatrix, Lambda_diag=None, cfg: SolverConfig | None = None, rng=None):
    """Point of ``[-1, 1]^n`` with many ``+-1`` coordinates and small ``||A Lambda v||_inf``."""
    cfg = cfg or SolverConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    lam = np.ones(A.n) if Lambda_diag is None else np.asarray(Lambda_diag, dtype=np.float64)
    B = A.scale_columns(lam)
    n, m = B.n, B.m
    bound = cfg.spencer_constant * spencer_scale(n, m)
    need = n / cfg.partial_fraction_divisor
    if m > n * n:
        v = random_coloring_checked(B, bound, rng, cfg.random_coloring_retries)
        return PartialColoringResult(ColoringVector(v), n, discrepancy(B, v))
    for attempt in range(cfg.retry_count):
        try:
            v, C_alg, n_heavy = _partial_once(B, cfg, rng)
        except (ColoringFailure, DiscError):
            continue
        cv = ColoringVector(v)
        disc = discrepancy(B, v)
        if cv.fixed_count >= need and disc <= bound:
            return PartialColoringResult(cv, cv.fixed_count, disc, attempt, C_alg, n_heavy)
    raise RetriesExhausted(f"partial coloring failed {cfg.retry_count} times")


# full colorings -----------------------------------------------------------

def phase_cap(n: int, cfg: SolverConfig) -> int:
    shrink = 1.0 - 1.0 / (2.0 * cfg.partial_fraction_divisor)
    return math.ceil(math.log(max(n, 2)) / -math.log(shrink)) + 1


def _combine(v_prev, lam, vp, sigma):
    """``v_prev + sigma Lambda v'`` with coordinates that reach the boundary snapped to +-1."""
    out = v_prev + sigma * lam * vp
    hit = (np.abs(vp) == 1.0) & ((v_prev == 0.0) | (np.sign(v_prev) == sigma * vp))
    out[hit] = np.sign(sigma * vp[hit])
    if np.abs(out).max(initial=0.0) > 1.0:
        raise AssertionError("combined coloring left the cube")
    return out, int(hit.sum())


def dense_coloring(A: SetSystemMatrix, cfg: SolverConfig | None = None, rng=None, *, trace=None):
    """Full ``+-1`` coloring by repeated partial coloring of the unfixed coordinates."""
    cfg = cfg or SolverConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    trace = PipelineTrace() if trace is None else trace
    n = A.n
    v = np.zeros(n)
    small = n / cfg.clog(n) ** 2
    cap = phase_cap(n, cfg)
    partial_phases = 0
    while True:
        G = np.flatnonzero(np.abs(v) != 1.0)
        if G.size == 0:
            return v
        t0 = time.perf_counter()
        AG = A.select_columns(G)
        if G.size >= small:
            partial_phases += 1
            if partial_phases > cap:
                raise AssertionError(f"more than {cap} partial phases")
            lam = 1.0 - np.abs(v[G])
            retries = 0
            while True:
                res = partial_coloring(AG, lam, cfg, rng)
                vp = res.v.values
                options = []
                for sigma in (1.0, -1.0):
                    cand, newly = _combine(v[G], lam, vp, sigma)
                    if newly >= G.size / (2.0 * cfg.partial_fraction_divisor):
                        full = v.copy()
                        full[G] = cand
                        options.append((discrepancy(A, full), sigma, full))
                if options:
                    break
                retries += 1
                if retries >= cfg.retry_count:
                    raise RetriesExhausted("no sign fixes enough coordinates")
            _, _, v = min(options, key=lambda o: (o[0], -o[1]))
            trace.add(PhaseRecord("partial", int(G.size), A.m, AG.nnz, res.discrepancy,
                                  _micros(t0), retries + res.retries))
        else:
            prev = A.matvec(v)
            v_new, tries = random_coloring_checked(
                A, cfg.completion_constant * math.sqrt(n), rng, cfg.random_coloring_retries,
                base=v, offset=prev, return_tries=True)
            contrib = float(np.abs(A.matvec(v_new) - prev).max()) if A.m else 0.0
            v = v_new
            trace.add(PhaseRecord("completion", int(G.size), A.m, AG.nnz, contrib, _micros(t0), tries - 1))


def coloring(A: SetSystemMatrix, cfg: SolverConfig | None = None, rng=None, *, mode="auto", trace=None):
    """Full ``+-1`` coloring with ``||Av||_inf <= spencer_constant * sqrt(n log(m/n + 2))``.

    ``mode`` forces a strategy: ``"random"``, ``"sparse"``, ``"dense"``, or
    ``"auto"`` (route by shape and column norms). The final bound is
    asserted, and a failing run is repeated up to ``retry_count`` times.
    """
    cfg = cfg or SolverConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    trace = PipelineTrace() if trace is None else trace
    n, m = A.n, A.m
    if n == 0:
        return np.zeros(0)
    bound = cfg.spencer_constant * spencer_scale(n, m)
    if mode == "auto":
        if m > n * n:
            mode = "random"
        elif m < n / cfg.clog(n) ** 2:
            mode = "sparse"
        else:
            mode = "split"
    if mode not in ("random", "sparse", "dense", "split"):
        raise ValueError(f"unknown mode {mode!r}")
    trace.branch = mode
    for attempt in range(cfg.retry_count):
        trace.phases.clear()
        try:
            v = _run_branch(A, mode, bound, cfg, rng, trace)
        except DiscError:
            continue
        if not np.all(np.abs(v) == 1.0):
            raise AssertionError("pipeline returned a non-integral coloring")
        if discrepancy(A, v) <= bound:
            return v
    raise RetriesExhausted(f"no coloring within {bound} after {cfg.retry_count} runs")


def _run_branch(A, mode, bound, cfg, rng, trace):
    t0 = time.perf_counter()
    if mode == "random":
        v, tries = random_coloring_checked(A, bound, rng, cfg.random_coloring_retries, return_tries=True)
        trace.add(PhaseRecord("random", A.n, A.m, A.nnz, discrepancy(A, v), _micros(t0), tries - 1))
        return v
    if mode == "sparse":
        v, info = sparse_coloring(A, cfg, rng, return_info=True)
        trace.add(PhaseRecord("sparse", A.n, A.m, A.nnz, discrepancy(A, v), _micros(t0), info["retries"]))
        return v
    if mode == "dense":
        return dense_coloring(A, cfg, rng, trace=trace)
    # split: light columns by the walk, heavy columns by the recursion
    light = A.col_norms() <= math.sqrt(A.n) / cfg.clog(A.n)
    v = np.empty(A.n)
    if light.any():
        Al = A.select_columns(np.flatnonzero(light))
        v[light], info = sparse_coloring(Al, cfg, rng, return_info=True)
        trace.add(PhaseRecord("sparse", Al.n, Al.m, Al.nnz, discrepancy(Al, v[light]),
                              _micros(t0), info["retries"]))
    if (~light).any():
        v[~light] = dense_coloring(A.select_columns(np.flatnonzero(~light)), cfg, rng, trace=trace)
    return v
