"""Diagrammatic bounds on the catalog graphs.

For each graph and p the script prints the bubble spectral radius, the
smallest margins of the bounds on pi^(0), pi^(1) and pi^(2), and the
smallest margins of the auxiliary Theta inequalities. When the bubble
radius reaches one, psi is infinite and the bounds hold trivially.
"""
import numpy as np

from lacelab import diagrams as dg
from lacelab.lattice import CATALOG


def row(graph, p):
    rho = dg.bubble_radius(graph, p)
    margins = [float(np.min(dg.verify_diagrammatic_bounds(graph, p, j))) for j in range(3)]
    aux = dg.aux_bound_sweep(graph, p, max_A=2)
    return rho, margins, min(aux.values())


if __name__ == "__main__":
    print(f"{'graph':<12} {'p':>4} {'bubble':>8} {'pi0':>10} {'pi1':>10} {'pi2':>10} {'aux':>10}")
    for name in ("single-bond", "path-3", "triangle", "square", "square-diag", "box-2x2"):
        g = CATALOG[name]
        for p in (0.1, 0.2, 0.5):
            rho, m, a = row(g, p)
            print(f"{name:<12} {p:>4} {rho:>8.4f} " + " ".join(f"{v:>10.3g}" for v in m) + f" {a:>10.3g}")
