"""Elephant random walks with graph-based shared memory.

Simulation, exact moment oracles, limiting covariances and Monte Carlo checks
of the associated limit theorems.
"""

__version__ = "0.1.0"

from .errors import ERWGError
from .graph import (DirectedGraph, WalkConfig, build_graph, config_from_dict, cycle,
                    load_config, make_config, memory_matrix, self_loop, two_elephants)
from .spectral import Regime, RegimeLabel, Spectrum, analyze, classify, d_scale, matrix_power

__all__ = [
    "__version__", "ERWGError", "DirectedGraph", "WalkConfig", "build_graph",
    "config_from_dict", "cycle", "load_config", "make_config", "memory_matrix", "self_loop",
    "two_elephants", "Regime", "RegimeLabel", "Spectrum", "analyze", "classify", "d_scale",
    "matrix_power",
]
