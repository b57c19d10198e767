"""Command-line entry point: read a set system, color it, report.

Exit status: 0 on success, 1 on input or parse errors, 2 when no coloring
within the bound was produced (or ``--verify`` finds the bound violated).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .coloring import PipelineTrace, PhaseRecord, coloring, partial_coloring
from .config import SolverConfig, make_rng, spencer_scale
from .core import discrepancy
from .errors import DiscError, ParseError, RetriesExhausted
from .io import parse_input

SCHEMA_VERSION = 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="disclib", description="Low-discrepancy coloring of set systems.")
    p.add_argument("--input", required=True, help="input file ('-' for stdin)")
    p.add_argument("--format", choices=("sets", "coo"), default="sets",
                   help="sets: 1-based element lists; coo: 0-based 'row col value' lines")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to $DISCLIB_SEED)")
    p.add_argument("--mode", choices=("auto", "dense", "sparse", "random", "partial"), default="auto")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--verify", action="store_true", help="recompute the discrepancy and check the bound")
    p.add_argument("--config", help="JSON file overriding SolverConfig fields")
    p.add_argument("--stats", nargs="?", const="-", metavar="PATH",
                   help="write the per-phase trace as CSV (stdout if no path)")
    return p


def _read(path):
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _resolve_seed(args, cfg):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DISCLIB_SEED")
    if env is not None:
        return int(env)
    return cfg.seed


def _fail(code, msg):
    print(f"disclib: {msg}", file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = SolverConfig.from_json(args.config) if args.config else SolverConfig()
        seed = _resolve_seed(args, cfg)
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        cfg = cfg.replace(seed=seed)
        A = parse_input(_read(args.input), args.format)
    except ParseError as exc:
        return _fail(1, f"parse error: {exc}")
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
        return _fail(1, f"input error: {exc}")

    rng = make_rng(seed)
    trace = PipelineTrace()
    bound = cfg.spencer_constant * spencer_scale(A.n, A.m)
    t0 = time.perf_counter()
    try:
        if args.mode == "partial":
            res = partial_coloring(A, None, cfg, rng)
            v = res.v.values
            trace.branch = "partial"
            trace.add(PhaseRecord("partial", A.n, A.m, A.nnz, res.discrepancy,
                                  int((time.perf_counter() - t0) * 1e6), res.retries))
        else:
            v = coloring(A, cfg, rng, mode="dense" if args.mode == "dense" else args.mode, trace=trace)
    except RetriesExhausted as exc:
        return _fail(2, f"no coloring within the bound: {exc}")
    except DiscError as exc:
        return _fail(2, f"pipeline failure: {exc}")
    total_micros = int((time.perf_counter() - t0) * 1e6)

    disc = discrepancy(A, v)
    report = {
        "schema": SCHEMA_VERSION,
        "m": A.m,
        "n": A.n,
        "nnz": A.nnz,
        "seed": seed,
        "mode": args.mode,
        "branch": trace.branch,
        "coloring": [int(x) if abs(x) == 1 else float(x) for x in v],
        "discrepancy": disc,
        "bound": bound,
        "trace": [{c: getattr(p, c) for c in PipelineTrace.CSV_COLUMNS if c != "micros"}
                  for p in trace.phases],
        "config": cfg.to_dict(),
        "timing": {"total_micros": total_micros, "phase_micros": [p.micros for p in trace.phases]},
    }
    status = 0
    if args.verify:
        again = float(np.abs(A.matvec(np.asarray(report["coloring"], dtype=np.float64))).max(initial=0.0))
        report["verified"] = abs(again - disc) <= 1e-9 and again <= bound
        if not report["verified"]:
            status = 2
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.stats:
        fh = sys.stdout if args.stats == "-" else open(args.stats, "w", newline="", encoding="utf-8")
        try:
            writer = csv.writer(fh)
            writer.writerow(PipelineTrace.CSV_COLUMNS)
            writer.writerows(trace.rows())
        finally:
            if fh is not sys.stdout:
                fh.close()
    print(f"n={A.n} m={A.m} branch={trace.branch} discrepancy={disc:.6g} bound={bound:.6g}")
    if status:
        print("disclib: discrepancy exceeds the bound", file=sys.stderr)
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
