"""Solver constants, the clamped logarithm, and the RNG contract.

The analysis behind the pipeline only fixes its constants up to absolute
factors. Everything that needs a concrete number at run time lives on
:class:`SolverConfig`; the defaults are tuned for instances with n up to a
few thousand. :meth:`SolverConfig.theoretical` returns the asymptotic
schedule (tiny penalty, tiny minimax accuracy) for experiments.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, fields

import numpy as np


@dataclass(frozen=True)
class SolverConfig:
    seed: int = 0
    # C_Alg is drawn uniformly from [c0, 2*c0]
    c0: float = 0.8
    # acceptance constant K in ||Av||_inf <= K * sqrt(n log(m/n + 2))
    spencer_constant: float = 6.0
    mwu_iter_multiplier: int = 1
    minimax_iter_multiplier: int = 1
    retry_count: int = 8
    # binary-search resolution for Lambda, in units of sqrt(n)
    lambda_tolerance: float = 0.1
    log_clamp_floor: float = 2.0
    partial_fraction_divisor: int = 8

    # None selects the theoretical value 1 / L(n)^4
    penalty_delta: float | None = 0.5
    # None selects the theoretical value 1 / (2 sqrt(n) L(n)^4)
    minimax_eps: float | None = 0.1
    # the minimax dual step is sqrt(log m / T) / divisor
    minimax_eta_divisor: float = 1.0
    minimax_max_iters: int = 200_000
    # MWU additive slack is mwu_eps_multiplier * sqrt(n) / L(n)^3
    mwu_eps_multiplier: float = 4.0
    mwu_min_iters: int = 8
    mwu_max_iters: int = 64
    # prior mass on the objective expert
    mwu_objective_prior: float = 0.5
    # normalize margins by the largest margin seen so far instead of the a-priori width
    mwu_adaptive_width: bool = True
    # the Hedge step is mwu_eta_scale * min(1/2, sqrt(log(2m + 1) / T))
    mwu_eta_scale: float = 2.0

    # random coloring of heavy columns must satisfy ||A1 v1|| <= heavy_constant * sqrt(n)
    heavy_constant: float = 4.0
    # random completion in dense coloring may add completion_constant * sqrt(n)
    completion_constant: float = 10.0
    # threshold of the self-balancing walk is walk_constant * ln(m n)
    walk_constant: float = 1.0
    walk_retries: int = 20
    gaussian_retries: int = 1000
    random_coloring_retries: int = 64

    def __post_init__(self):
        for name in ("mwu_iter_multiplier", "minimax_iter_multiplier", "retry_count",
                     "partial_fraction_divisor"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if not self.lambda_tolerance > 0:
            raise ValueError("lambda_tolerance must be positive")
        if self.penalty_delta is not None and not 0 < self.penalty_delta <= 1:
            raise ValueError("penalty_delta must lie in (0, 1]")
        if self.minimax_eps is not None and not 0 < self.minimax_eps < 1:
            raise ValueError("minimax_eps must lie in (0, 1)")
        if not self.mwu_eta_scale > 0:
            raise ValueError("mwu_eta_scale must be positive")
        if not 0 < self.mwu_objective_prior < 1:
            raise ValueError("mwu_objective_prior must lie in (0, 1)")

    @classmethod
    def theoretical(cls, **overrides) -> "SolverConfig":
        """Asymptotic schedule: delta = 1/L^4, minimax eps = 1/(2 sqrt(n) L^4)."""
        base = dict(penalty_delta=None, minimax_eps=None, minimax_eta_divisor=100.0,
                    minimax_iter_multiplier=1, mwu_eps_multiplier=1.0,
                    mwu_min_iters=16, mwu_max_iters=10**6, mwu_objective_prior=0.5, c0=2.0,
                    mwu_adaptive_width=False, mwu_eta_scale=1.0)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SolverConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    # schedule helpers -------------------------------------------------

    def clog(self, x: float) -> float:
        """Natural log clamped below by ``log_clamp_floor``."""
        return clamped_log(x, self.log_clamp_floor)

    def delta(self, n: int) -> float:
        if self.penalty_delta is None:
            return 1.0 / self.clog(n) ** 4
        return float(self.penalty_delta)

    def oracle_eps(self, n: int) -> float:
        if self.minimax_eps is None:
            return 1.0 / (2.0 * math.sqrt(n) * self.clog(n) ** 4)
        return float(self.minimax_eps)


def clamped_log(x: float, floor: float = 2.0) -> float:
    """``max(ln x, floor)``; used wherever the analysis writes ``log n``."""
    if x <= 0:
        return floor
    return max(math.log(x), floor)


def spencer_scale(n: int, m: int) -> float:
    """``sqrt(n log(m/n + 2))``, the natural unit of discrepancy."""
    if n == 0:
        return 0.0
    return math.sqrt(n * math.log(m / n + 2.0))


# RNG contract: a numpy Generator. Same seed, same stream.

def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def substream(rng: np.random.Generator) -> np.random.Generator:
    """Derive an independent child stream (advances the parent deterministically)."""
    return rng.spawn(1)[0]
