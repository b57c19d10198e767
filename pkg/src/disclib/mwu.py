"""Approximate maximization of ``<v, x>`` over ``Gamma_{A,C}``.

``Gamma_{A,C} = {x : ||x||_inf <= 1, ||Ax||_inf <= C sqrt(n log(m/n + 2))}``.
Feasibility of ``v^T x / sqrt(n) >= Lambda`` over it is decided by
multiplicative weights over ``2m + 1`` experts (the objective row and both
sides of every constraint row), each round calling the width-reduced
oracle. A bisection over ``Lambda`` then gives a near-maximizer, which is
shrunk toward the origin just enough to lie in ``Gamma_{A,C}`` exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SolverConfig, make_rng, spencer_scale, substream
from .core import SetSystemMatrix
from .errors import (DimensionMismatch, DiscError, FeasibilityLost, NoFeasibleLevel,
                     NormViolation, OracleFailureBudgetExceeded)
from .oracle import Infeasible, MwuWeights, Point, regularized_solve
from .sampling_tree import WeightTree

_LN2 = math.log(2.0)


@dataclass
class FeasibilityInstance:
    A: SetSystemMatrix
    v: np.ndarray
    C: float
    Lambda: float
    eps: float

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        n = self.A.n
        if self.v.shape != (n,):
            raise DimensionMismatch(f"v has shape {self.v.shape}, expected ({n},)")
        if float(np.linalg.norm(self.v)) > 2.0 * math.sqrt(n) + 1e-9:
            raise NormViolation("||v||_2 exceeds 2 sqrt(n)")
        if self.Lambda < 0:
            raise ValueError("Lambda must be nonnegative")

    @property
    def c_mn(self) -> float:
        return self.C * spencer_scale(self.A.n, self.A.m)


@dataclass
class MwuResult:
    """Outcome of one feasibility run.

    ``status`` is ``"feasible"`` (``x`` meets every constraint within
    ``eps``), ``"infeasible"`` (an oracle certificate was returned) or
    ``"unconverged"`` (the iteration cap was hit first).
    """

    status: str
    x: np.ndarray | None
    Lambda: float
    iterations: int
    T: int
    rho: float
    eta: float
    oracle_failures: int = 0
    certificate: Infeasible | None = None
    max_margin: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def mwu_width(inst: FeasibilityInstance, cfg: SolverConfig) -> float:
    """Bound on ``|lhs - rhs|`` of any constraint at any oracle point."""
    A = inst.A
    n = A.n
    sqn = math.sqrt(n)
    obj = inst.Lambda + float(np.abs(inst.v).sum()) / sqn
    l1 = A.row_l1_norms()
    ax_cap = 10.0 * sqn / min(cfg.delta(n), 1.0)
    if l1.size:
        ax_cap = min(ax_cap, float(l1.max()))
    return max(obj, ax_cap + inst.c_mn, 1e-12)


def schedule(inst: FeasibilityInstance, cfg: SolverConfig):
    """``(T, eta, rho)``: Hedge iteration count, step and width."""
    rho = mwu_width(inst, cfg)
    experts = 2 * inst.A.m + 1
    log_e = max(math.log(experts), _LN2)
    T = math.ceil(cfg.mwu_iter_multiplier * rho * rho * log_e / inst.eps ** 2)
    T = int(min(max(T, cfg.mwu_min_iters), cfg.mwu_max_iters))
    eta = cfg.mwu_eta_scale * min(0.5, math.sqrt(log_e / T))
    return T, eta, rho


def margins(inst: FeasibilityInstance, x) -> np.ndarray:
    """Signed slack ``lhs - rhs`` of every expert's constraint at ``x`` (>= 0 means satisfied)."""
    A = inst.A
    Ax = A.matvec(x)
    c = inst.c_mn
    out = np.empty(2 * A.m + 1)
    out[0] = float(inst.v @ x) / math.sqrt(A.n) - inst.Lambda
    out[1:A.m + 1] = c - Ax
    out[A.m + 1:] = c + Ax
    return out


def _initial_weights(m: int, cfg: SolverConfig) -> np.ndarray:
    if m == 0:
        return np.ones(1)
    w = np.full(2 * m + 1, (1.0 - cfg.mwu_objective_prior) / (2 * m))
    w[0] = cfg.mwu_objective_prior
    return w


def mwu_feasibility(inst: FeasibilityInstance, cfg: SolverConfig | None = None, rng=None) -> MwuResult:
    """Decide ``exists x in Gamma_{A,C}: v^T x / sqrt(n) >= Lambda`` up to additive ``eps``."""
    cfg = cfg or SolverConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    A, n = inst.A, inst.A.n
    T, eta, rho = schedule(inst, cfg)
    tree = WeightTree(_initial_weights(A.m, cfg))
    xsum = np.zeros(n)
    failures = 0
    worst = 0.0
    # observed width: every consumed margin is normalized by a bound it respects
    seen = 0.0
    for t in range(1, T + 1):
        p = tree.probabilities()
        p = p / p.sum()
        w = MwuWeights.from_vector(p) if A.m else MwuWeights(1.0, np.zeros(0), np.zeros(0))
        while True:
            try:
                out = regularized_solve(A, w, inst.v, inst.Lambda, inst.C, cfg, substream(rng))
                break
            except (DiscError, AssertionError):
                failures += 1
                if failures > cfg.retry_count:
                    raise OracleFailureBudgetExceeded(f"{failures} failed oracle calls")
        if isinstance(out, Infeasible):
            return MwuResult("infeasible", None, inst.Lambda, t, T, rho, eta, failures, out, worst)
        raw = margins(inst, out.x)
        peak = float(np.abs(raw).max())
        if peak > rho * (1.0 + 1e-9):
            raise AssertionError(f"oracle point exceeds the a-priori width: {peak} > {rho}")
        seen = max(seen, peak)
        width = seen if cfg.mwu_adaptive_width else rho
        mj = raw / width if width > 0 else raw
        worst = max(worst, float(np.abs(mj).max()))
        tree.mult_all_log2(-eta * mj[:tree.m] / _LN2)
        xsum += out.x
        if t >= cfg.mwu_min_iters or t == T:
            xbar = xsum / t
            if margins(inst, xbar).min() >= -inst.eps:
                return MwuResult("feasible", xbar, inst.Lambda, t, T, rho, eta, failures, None, worst)
    return MwuResult("unconverged", xsum / T, inst.Lambda, T, T, rho, eta, failures, None, worst)


@dataclass
class SearchTrace:
    probes: list = field(default_factory=list)

    def record(self, Lambda, result: MwuResult):
        self.probes.append((float(Lambda), result.status, result.iterations))

    def monotone_violations(self):
        """Pairs ``(low, high)`` where ``high`` was feasible but ``low < high`` was certified infeasible."""
        feas = [lam for lam, s, _ in self.probes if s == "feasible"]
        bad = [lam for lam, s, _ in self.probes if s == "infeasible"]
        return [(b, f) for b in bad for f in feas if b < f]


def mwu_slack(n: int, cfg: SolverConfig) -> float:
    """Additive MWU slack ``mwu_eps_multiplier * sqrt(n) / L(n)^3``."""
    return cfg.mwu_eps_multiplier * math.sqrt(n) / cfg.clog(n) ** 3


def binary_search_lambda(A: SetSystemMatrix, v, C: float, cfg: SolverConfig | None = None, rng=None,
                         *, trace: SearchTrace | None = None):
    """Largest feasible level found by bisection and its MWU point."""
    cfg = cfg or SolverConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    v = np.asarray(v, dtype=np.float64)
    n = A.n
    sqn = math.sqrt(n)
    eps = mwu_slack(n, cfg)
    hi = min(2.0 * sqn, float(np.abs(v).sum()) / sqn)
    tol = cfg.lambda_tolerance * sqn
    for _attempt in range(cfg.retry_count):
        local = SearchTrace()
        lo, best = 0.0, np.zeros(n)
        top = hi
        while top - lo > tol:
            mid = 0.5 * (lo + top)
            res = mwu_feasibility(FeasibilityInstance(A, v, C, mid, eps), cfg, substream(rng))
            local.record(mid, res)
            if res.feasible:
                lo, best = mid, res.x
            else:
                top = mid
        if trace is not None:
            trace.probes.extend(local.probes)
        if not local.monotone_violations():
            break
    if not (lo >= 0 and best is not None):
        raise NoFeasibleLevel("no feasible level found")
    return lo, best


def _shrink_into_gamma(A: SetSystemMatrix, z, c_mn: float):
    """Scale ``z`` toward 0 until ``||Az||_inf <= c_mn`` holds as computed."""
    z = np.clip(z, -1.0, 1.0)
    width = float(np.abs(A.matvec(z)).max()) if A.m else 0.0
    if width <= c_mn:
        return z, 1.0
    s = c_mn / width
    for _ in range(64):
        y = z * s
        if float(np.abs(A.matvec(y)).max()) <= c_mn:
            return y, s
        s *= 1.0 - 1e-12
    raise FeasibilityLost("could not restore ||Az||_inf <= C_{m,n}")


def solve(A: SetSystemMatrix, v, C: float, cfg: SolverConfig | None = None, rng=None, *, return_info=False):
    """Near-maximizer ``z`` of ``<v, z>`` over ``Gamma_{A,C}`` (membership is exact)."""
    cfg = cfg or SolverConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    v = np.asarray(v, dtype=np.float64)
    n = A.n
    if v.shape != (n,):
        raise DimensionMismatch(f"v has shape {v.shape}, expected ({n},)")
    c_mn = C * spencer_scale(n, A.m)
    trace = SearchTrace()
    if n == 0 or not np.any(v):
        z, Lambda, s = np.zeros(n), 0.0, 1.0
    else:
        Lambda, xbar = binary_search_lambda(A, v, C, cfg, rng, trace=trace)
        # the smallest shrink that restores membership; never worse than a fixed 1 - 1/L^3 factor
        z, s = _shrink_into_gamma(A, xbar, c_mn)
    if not (np.abs(z).max(initial=0.0) <= 1.0 and (A.m == 0 or np.abs(A.matvec(z)).max() <= c_mn)):
        raise FeasibilityLost("returned point left Gamma_{A,C}")
    if return_info:
        return z, {"Lambda": Lambda, "shrink": s, "trace": trace}
    return z
