"""Exact counts behind source switching.

1. The path 0-1-2-3-4-5 carrying N = (3,3,1,5,1): both sides equal 256.
2. The symmetric-difference map along one path swaps the two families.
3. Two-pair partition counts on small multigraphs, under the three
   readings of the path condition. The literal (joint) reading gives
   unequal counts already on a single bond.
"""
import numpy as np

from lacelab import switching as sw
from lacelab.currents import pair_sources
from lacelab.lattice import build_graph

if __name__ == "__main__":
    mc = sw.path_instance()
    n = len(mc.N)
    print("path instance N =", mc.N)
    print("  brute force counts:", sw.count_switching_sides(mc, 0, 0, n))
    print("  closed form 2^sum(N-1):", 2 ** sum(k - 1 for k in mc.N))

    omega = sw.find_path(mc, 0, n)
    odd = [S for S in range(2 ** mc.n_edges) if mc.boundary(S) == pair_sources(0, n)]
    image = {sw.switching_bijection(S, omega) for S in odd}
    print(f"  S -> S ^ omega sends {len(odd)} selections onto {len(image)} sourceless ones")

    print("\nrandom switching instances (A arbitrary):")
    rng = np.random.default_rng(7)
    for _ in range(5):
        m, A, v, x = sw.random_switching_instance(rng)
        print(f"  bonds={m.graph.bonds} N={m.N} A={A:#b} v={v} x={x} ->",
              sw.count_switching_sides(m, A, v, x))

    print("\ntwo-pair partition counts (|S|, |S'|):")
    cases = [
        ("single bond, N=3, V={0,1}", build_graph("custom", bonds=[(0, 1)], n_sites=2), (3,),
         0b11, [(0, 1), (0, 1)]),
        ("single bond, N=2, V={}", build_graph("custom", bonds=[(0, 1)], n_sites=2), (2,),
         0, [(0, 1), (0, 1)]),
        ("fork, N=(2,1), V={0,2}", build_graph("custom", bonds=[(0, 1), (0, 2)], n_sites=3), (2, 1),
         0b101, [(2, 1), (1, 0)]),
    ]
    for label, g, N, V, pairs in cases:
        m = sw.MultiCurrent(g, N)
        counts = {r: sw.verify_ghs_bk(m, V, pairs, r) for r in sw.READINGS}
        print(f"  {label}: " + ", ".join(f"{r} {c}" for r, c in counts.items()))
