"""Stochastic on-time arrival policies with pruned search spaces."""
from .distributions import DiscretePdf, GammaSpec, NormalMixtureSpec, PmfSpec, discretize
from .graph import Graph, WeightView, dijkstra, read_graph, write_graph
from .network import StochasticGraph, load_network
from .pruning import PenaltyParams, PruneSet, ViaParams, build
from .solver import (
    Policy,
    SolveStats,
    extract_optimal_order,
    rerun_on_order,
    simulate_policy,
    solve_label_setting,
    solve_successive_approx,
)

__version__ = "0.1.0"

__all__ = [
    "DiscretePdf", "GammaSpec", "NormalMixtureSpec", "PmfSpec", "discretize",
    "Graph", "WeightView", "dijkstra", "read_graph", "write_graph",
    "StochasticGraph", "load_network",
    "PenaltyParams", "PruneSet", "ViaParams", "build",
    "Policy", "SolveStats", "extract_optimal_order", "rerun_on_order", "simulate_policy",
    "solve_label_setting", "solve_successive_approx",
]
