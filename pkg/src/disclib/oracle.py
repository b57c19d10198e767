"""Width-reduced oracle for the MWU feasibility loop.

Given expert weights ``(rho0, rho_plus, rho_minus)`` the oracle approximately
minimizes the penalized objective

    P(x) = -rho0 v^T x / sqrt(n) + rho_plus^T A x - rho_minus^T A x + delta ||A x||_inf

over ``[-1, 1]^n`` by handing an equivalent minimax instance to
:func:`disclib.minimax.optimize`, then either returns a point of bounded
width or certifies that the feasibility program at level ``Lambda`` is empty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SolverConfig, make_rng, spencer_scale
from .core import SetSystemMatrix
from .errors import DimensionMismatch, NormViolation, WeightInvariantViolation
from .minimax import NORM_SLACK, ConstraintAccessor, optimize

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class MwuWeights:
    """Normalized expert weights: objective, upper rows, lower rows."""

    rho0: float
    rho_plus: np.ndarray
    rho_minus: np.ndarray

    def __post_init__(self):
        rp = np.asarray(self.rho_plus, dtype=np.float64)
        rm = np.asarray(self.rho_minus, dtype=np.float64)
        object.__setattr__(self, "rho_plus", rp)
        object.__setattr__(self, "rho_minus", rm)
        if rp.shape != rm.shape or rp.ndim != 1:
            raise DimensionMismatch("rho_plus and rho_minus must be vectors of equal length")
        if self.rho0 < 0 or np.any(rp < 0) or np.any(rm < 0):
            raise WeightInvariantViolation("weights must be nonnegative")
        total = self.rho0 + float(rp.sum()) + float(rm.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise WeightInvariantViolation(f"weights sum to {total}, not 1")

    @classmethod
    def uniform(cls, m: int) -> "MwuWeights":
        w = 1.0 / (2 * m + 1)
        return cls(w, np.full(m, w), np.full(m, w))

    @classmethod
    def from_vector(cls, w) -> "MwuWeights":
        """Split a length ``2m + 1`` vector ``(rho0, rho_plus, rho_minus)``."""
        w = np.asarray(w, dtype=np.float64)
        m = (w.size - 1) // 2
        return cls(float(w[0]), w[1:m + 1], w[m + 1:])

    @property
    def m(self) -> int:
        return self.rho_plus.size

    @property
    def row_mass(self) -> float:
        return float(self.rho_plus.sum() + self.rho_minus.sum())


@dataclass
class Point:
    """Oracle point ``x`` in the unit cube with ``width = ||Ax||_inf``."""

    x: np.ndarray
    width: float
    lhs_value: float
    case: str
    diagnostics: dict = field(default_factory=dict)


@dataclass
class Infeasible:
    """Certificate: the attained ``lhs_value`` exceeded ``threshold``."""

    threshold_exceeded: float
    threshold: float
    diagnostics: dict = field(default_factory=dict)


OracleOutcome = Point | Infeasible


def _check_dims(A: SetSystemMatrix, w: MwuWeights, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (A.n,):
        raise DimensionMismatch(f"v has shape {v.shape}, expected ({A.n},)")
    if w.m != A.m:
        raise DimensionMismatch(f"weights cover {w.m} rows, matrix has {A.m}")
    return v


def linear_part(A: SetSystemMatrix, w: MwuWeights, v):
    """``u`` with ``u^T x = -rho0 v^T x / sqrt(n) + (rho_plus - rho_minus)^T A x``."""
    v = _check_dims(A, w, v)
    n = max(A.n, 1)
    return -w.rho0 * v / math.sqrt(n) + A.rmatvec(w.rho_plus - w.rho_minus)


def constraint_lhs(A: SetSystemMatrix, w: MwuWeights, v, x) -> float:
    """The unpenalized part ``-rho0 v^T x / sqrt(n) + rho_plus^T Ax - rho_minus^T Ax``."""
    v = _check_dims(A, w, v)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({A.n},)")
    Ax = A.matvec(x)
    return float(-w.rho0 * (v @ x) / math.sqrt(max(A.n, 1)) + (w.rho_plus - w.rho_minus) @ Ax)


def eval_penalized(A: SetSystemMatrix, w: MwuWeights, v, delta: float, x) -> float:
    """``P(x)``, in O(nnz + m + n)."""
    x = np.asarray(x, dtype=np.float64)
    lhs = constraint_lhs(A, w, v, x)
    Ax = A.matvec(x)
    return lhs + delta * (float(np.abs(Ax).max()) if Ax.size else 0.0)


def build_reduction(A: SetSystemMatrix, w: MwuWeights, v, delta: float):
    """Minimax instance ``(v', accessor, beta)`` equivalent to minimizing ``P``.

    With ``u`` from :func:`linear_part` and ``beta = max(||u||_2, delta max_i ||A_i||_2)``,
    ``v' = u / (2 beta)`` and the constraint vectors are ``+-delta A_i / (2 beta)``
    over the rows of ``A``, read from its storage on the fly. For ``x`` in the
    unit cube and ``x' = x / sqrt(n)``,
    ``max_j (v' + v_j)^T x' = P(x) / (2 beta sqrt(n))``.
    """
    if not 0 < delta < 1 + NORM_SLACK:
        raise ValueError("delta must lie in (0, 1]")
    v = _check_dims(A, w, v)
    if float(np.linalg.norm(v)) > 2.0 * math.sqrt(A.n) + NORM_SLACK:
        raise NormViolation("||v||_2 exceeds 2 sqrt(n)")
    u = linear_part(A, w, v)
    # the smallest beta keeping v' and every v_j within norm 1/2; sqrt(n) would also
    # do (rows of A have norm <= sqrt(n)) but wastes accuracy on sparse rows
    rows = A.row_norms()
    beta = max(float(np.linalg.norm(u)), delta * float(rows.max()) if rows.size else 0.0)
    if beta == 0.0:
        beta = 1.0
    v_prime = u / (2.0 * beta)
    if float(np.linalg.norm(v_prime)) > 0.5 + NORM_SLACK:
        raise NormViolation("||v'||_2 exceeds 1/2")
    acc = ConstraintAccessor.from_matrix(A, scale=delta / (2.0 * beta), mirrored=True)
    return v_prime, acc, beta


def case_two_threshold(w: MwuWeights, Lambda: float, c_mn: float, delta: float, opt_error: float) -> float:
    """Largest ``lhs`` compatible with feasibility at level ``Lambda``.

    If the program is feasible the penalized optimum is at most
    ``-rho0 Lambda + (|rho_plus| + |rho_minus|) c_mn + delta c_mn``, and the
    returned point is within ``opt_error`` of it.
    """
    return -w.rho0 * Lambda + w.row_mass * c_mn + delta * c_mn + opt_error


def postprocess(A: SetSystemMatrix, w: MwuWeights, v, x, Lambda: float, C: float,
                delta: float, opt_error: float) -> OracleOutcome:
    """Turn an approximate minimizer of ``P`` into a Point or a certificate."""
    n = A.n
    sqn = math.sqrt(n)
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    Ax = A.matvec(x)
    width = float(np.abs(Ax).max()) if Ax.size else 0.0
    tau = delta * width
    c_mn = C * spencer_scale(n, A.m)
    lhs = constraint_lhs(A, w, v, x)
    diag = {"tau": tau, "delta": delta, "opt_error": opt_error, "c_mn": c_mn,
            "C_precondition_met": C <= math.sqrt(max(math.log(max(n, 1)), 0.0)) / 3.0}
    if tau >= 10.0 * sqn:
        scale = 10.0 * sqn / tau
        y = x * scale
        Ay = Ax * scale
        y_width = float(np.abs(Ay).max())
        y_lhs = lhs * scale
        diag["chain_value"] = y_lhs
        diag["chain_holds"] = y_lhs <= -5.0 * sqn
        return Point(y, y_width, y_lhs, "I", diag)
    threshold = case_two_threshold(w, Lambda, c_mn, delta, opt_error)
    diag["threshold"] = threshold
    if lhs <= threshold:
        return Point(x, width, lhs, "II", diag)
    return Infeasible(lhs, threshold, diag)


def regularized_solve(A: SetSystemMatrix, w: MwuWeights, v, Lambda: float, C: float,
                      cfg: SolverConfig | None = None, rng=None) -> OracleOutcome:
    """One oracle call at level ``Lambda`` for the feasibility program over ``Gamma_{A,C}``."""
    cfg = cfg or SolverConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    if not isinstance(w, MwuWeights):
        raise WeightInvariantViolation("weights must be an MwuWeights instance")
    n = A.n
    delta = min(cfg.delta(n), 1.0)
    eps = cfg.oracle_eps(n)
    v_prime, acc, beta = build_reduction(A, w, v, delta)
    x_scaled = optimize(v_prime, acc, eps, rng, cfg)
    x = math.sqrt(n) * x_scaled
    opt_error = 2.0 * beta * math.sqrt(n) * eps
    out = postprocess(A, w, v, x, Lambda, C, delta, opt_error)
    out.diagnostics["beta"] = beta
    if isinstance(out, Point):
        cap = 10.0 * math.sqrt(n) * cfg.clog(n) ** 4
        if not (np.abs(out.x).max(initial=0.0) <= 1.0 and out.width <= cap):
            raise AssertionError(f"oracle point out of contract: width {out.width} > {cap}")
    return out
