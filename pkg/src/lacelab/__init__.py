"""Exact enumeration checks for the random-current lace expansion of the Ising model."""
from .lattice import CATALOG, BudgetExceeded, GraphSpec, build_graph, resolve_graph

__all__ = ["CATALOG", "BudgetExceeded", "GraphSpec", "build_graph", "resolve_graph"]
__version__ = "0.1.0"
