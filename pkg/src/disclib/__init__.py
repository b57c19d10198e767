"""Low-discrepancy colorings of set systems in near input-sparsity time."""
from .config import SolverConfig, clamped_log, make_rng, spencer_scale
from .core import ColoringVector, SetSystemMatrix, build_matrix, discrepancy, matrix_stats
from .coloring import coloring, dense_coloring, partial_coloring, sparse_coloring
from .mwu import solve
from .sampling_tree import WeightTree

__all__ = [
    "SolverConfig", "clamped_log", "make_rng", "spencer_scale",
    "ColoringVector", "SetSystemMatrix", "build_matrix", "discrepancy", "matrix_stats",
    "coloring", "dense_coloring", "partial_coloring", "sparse_coloring", "solve", "WeightTree",
]

__version__ = "0.1.0"
