"""Exact counting checks of source switching on labeled multigraphs.

An integer current N is expanded into the multigraph with N_b labeled
parallel edges on bond b. Subgraph selections are int bitmasks over those
edges, and a selection's boundary is the bitmask of sites with odd
incident edge count. Everything in this module is integer arithmetic.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .currents import pair_sources, site_mask
from .lattice import GraphSpec, build_graph, check_switching_budget


@dataclass(frozen=True)
class MultiCurrent:
    graph: GraphSpec
    N: tuple

    def __post_init__(self):
        if len(self.N) != self.graph.n_bonds:
            raise ValueError("need one current value per bond")
        if any(int(n) < 0 for n in self.N):
            raise ValueError("currents must be nonnegative")
        object.__setattr__(self, "N", tuple(int(n) for n in self.N))

    @cached_property
    def edges(self):
        """(bond, label) per labeled edge, labels 0..N_b-1, ordered by bond."""
        return [(b, l) for b, n in enumerate(self.N) for l in range(n)]

    @property
    def n_edges(self):
        return sum(self.N)

    @cached_property
    def edge_ends(self):
        ends = self.graph.endpoint_masks()
        return [ends[b] for b, _ in self.edges]

    def edge_index(self, b, label):
        if not 0 <= label < self.N[b]:
            raise IndexError(f"bond {b} has {self.N[b]} edges")
        return sum(self.N[:b]) + label

    def edges_of_bonds(self, bond_mask):
        """Edge bitmask of all labeled edges on the bonds in ``bond_mask``."""
        out = 0
        for i, (b, _) in enumerate(self.edges):
            if (bond_mask >> b) & 1:
                out |= 1 << i
        return out

    def sources(self):
        """Boundary of the current itself (sites with odd total current)."""
        ends = self.graph.endpoint_masks()
        out = 0
        for b, n in enumerate(self.N):
            if n % 2:
                out ^= ends[b]
        return out

    def boundary(self, S):
        out = 0
        for i, e in enumerate(self.edge_ends):
            if (S >> i) & 1:
                out ^= e
        return out


def _boundary_table(ends):
    """Boundaries of all 2^len(ends) subsets of the given edges."""
    bnd = np.zeros(1, dtype=np.int64)
    for e in ends:
        bnd = np.concatenate([bnd, bnd ^ e])
    return bnd


def _as_mask(sites):
    return 0 if sites is None else site_mask(sites)


def connected_in(mc, v, x, within):
    """v and x joined by edges of G_N with both endpoints in ``within`` (v = x counts if inside)."""
    within = site_mask(within)
    if not ((within >> v) & 1 and (within >> x) & 1):
        return False
    seen, stack = 1 << v, [v]
    ends = mc.graph.bonds
    while stack:
        a = stack.pop()
        for b, (s, t) in enumerate(ends):
            if mc.N[b] == 0:
                continue
            for u, w in ((s, t), (t, s)):
                if u == a and (within >> w) & 1 and not (seen >> w) & 1:
                    seen |= 1 << w
                    stack.append(w)
    return bool((seen >> x) & 1)


def count_switching_sides(mc, A, v, x, V=None):
    """Both sides of the switching identity as integer counts.

    Selections may only use edges on bonds with both ends outside A. With
    V omitted, count_lhs = #{S : dS = {v, x}} and count_rhs = 1[v <-> x
    outside A] #{S : dS = {}}. With V given both sides carry the
    connection indicator and the source sets are V and V ^ {v, x}.
    """
    g = mc.graph
    Ac = g.full_mask & ~_as_mask(A)
    if v == x and not (Ac >> v) & 1:
        raise ValueError("v = x must lie outside A")
    allowed = g.bonds_within(Ac)
    ends = [e for (b, _), e in zip(mc.edges, mc.edge_ends) if (allowed >> b) & 1]
    check_switching_budget(len(ends), 2)
    bnd = _boundary_table(ends)
    conn = connected_in(mc, v, x, Ac)
    vx = pair_sources(v, x)
    if V is None:
        lhs = int(np.count_nonzero(bnd == vx))
        rhs = int(conn) * int(np.count_nonzero(bnd == 0))
    else:
        V = _as_mask(V)
        lhs = int(conn) * int(np.count_nonzero(bnd == V))
        rhs = int(conn) * int(np.count_nonzero(bnd == V ^ vx))
    return lhs, rhs


def closed_parity_count(mc, target, bond_mask=None):
    """#{S : dS = target} over edges on ``bond_mask`` without touching single edges.

    Each used bond with N_b > 0 contributes 2^(N_b - 1) selections of each
    parity, so the count is that product times the number of bond subsets
    F (of the used bonds) with boundary ``target``.
    """
    g = mc.graph
    bond_mask = (1 << g.n_bonds) - 1 if bond_mask is None else bond_mask
    used = [b for b in range(g.n_bonds) if (bond_mask >> b) & 1 and mc.N[b] > 0]
    ends = g.endpoint_masks()
    subsets = int(np.count_nonzero(_boundary_table([ends[b] for b in used]) == _as_mask(target)))
    mult = 1
    for b in used:
        mult *= 2 ** (mc.N[b] - 1)
    return mult * subsets


def switching_bijection(S, omega):
    """S ^ omega on edge bitmasks; an involution."""
    return S ^ omega


def find_path(mc, v, x, edge_mask=None, within=None):
    """Edge bitmask of one self-avoiding path v -> x, or None."""
    for path in _paths(mc, v, x, _all_edges(mc) if edge_mask is None else edge_mask, within):
        return path
    return None


def _all_edges(mc):
    return (1 << mc.n_edges) - 1


def _incidence(mc):
    inc = [[] for _ in range(mc.graph.n_sites)]
    for i, (b, _) in enumerate(mc.edges):
        s, t = mc.graph.bonds[b]
        inc[s].append((i, t))
        inc[t].append((i, s))
    return inc


def _paths(mc, z, zp, edge_mask, within=None):
    """Yield edge bitmasks of self-avoiding paths z -> zp inside ``edge_mask``."""
    within = mc.graph.full_mask if within is None else site_mask(within)
    if not ((within >> z) & 1 and (within >> zp) & 1):
        return
    inc = _incidence(mc)

    def walk(a, visited, used):
        if a == zp:
            yield used
            return
        for i, w in inc[a]:
            if (edge_mask >> i) & 1 and not (visited >> w) & 1 and (within >> w) & 1:
                yield from walk(w, visited | 1 << w, used | 1 << i)

    yield from walk(z, 1 << z, 0)


class _PathCache:
    def __init__(self, mc):
        self.mc = mc
        self.cache = {}

    def get(self, z, zp, edge_mask):
        key = (z, zp, edge_mask)
        if key not in self.cache:
            self.cache[key] = list(_paths(self.mc, z, zp, edge_mask))
        return self.cache[key]


def _disjoint_tuple_exists(options, used=0):
    """Pick one mask from each list, pairwise disjoint (backtracking)."""
    if not options:
        return True
    for m in options[0]:
        if not m & used and _disjoint_tuple_exists(options[1:], used | m):
            return True
    return False


def _splits(rest, k):
    """Ordered k-tuples of disjoint submasks covering ``rest``."""
    if k == 1:
        yield (rest,)
        return
    sub = rest
    while True:
        for tail in _splits(rest ^ sub, k - 1):
            yield (sub,) + tail
        if sub == 0:
            break
        sub = (sub - 1) & rest


def _family_size(mc, bnd, target0, targets, pairs, accept):
    full = _all_edges(mc)
    total = 0
    for S0 in np.nonzero(bnd == target0)[0]:
        S0 = int(S0)
        for parts in _splits(full ^ S0, len(pairs)):
            if any(int(bnd[S]) != t for S, t in zip(parts, targets)):
                continue
            total += accept(S0, parts)
    return total


class _OrderedPaths:
    """Path families of the ordered decomposition, memoised by prefix.

    Paths z_i -> z'_i on G_N are ordered by (length, edge bitmask). The
    admissible set for step l+1 given chosen paths w_1..w_l keeps paths
    avoiding the chosen edges, containing no admissible path of an
    earlier step that precedes the one chosen there, and leaving room for
    edge-disjoint paths for the remaining pairs.
    """

    def __init__(self, mc, pairs):
        self.mc = mc
        self.pairs = pairs
        full = _all_edges(mc)
        self.all = [sorted(_paths(mc, z, zp, full), key=lambda m: (bin(m).count("1"), m))
                    for z, zp in pairs]
        self.memo = {}

    def _room(self, start, used):
        opts = [[m for m in self.all[i] if not m & used] for i in range(start, len(self.pairs))]
        return _disjoint_tuple_exists(opts)

    def admissible(self, chosen):
        chosen = tuple(chosen)
        if chosen in self.memo:
            return self.memo[chosen]
        l = len(chosen)
        used = 0
        for m in chosen:
            used |= m
        earlier = []
        for i in range(l):
            fam = self.admissible(chosen[:i])
            earlier += fam[: fam.index(chosen[i])]
        out = []
        for m in self.all[l]:
            if m & used or any(m & xi == xi for xi in earlier):
                continue
            if l + 1 < len(self.pairs) and not self._room(l + 1, used | m):
                continue
            out.append(m)
        self.memo[chosen] = out
        return out

    def accepts(self, S0, parts):
        chosen = []
        for S in parts:
            room = S0 | S
            pick = next((m for m in self.admissible(chosen) if m & room == m), None)
            if pick is None:
                return False
            chosen.append(pick)
        return True


READINGS = ("joint", "independent", "ordered")


def verify_ghs_bk(mc, V, pairs, reading="joint"):
    """(|S|, |S'|) for edge partitions (S_0, ..., S_k) of G_N.

    S: dS_0 = V, dS_i = {} for i >= 1. S': dS_0 = V ^ {z_1, z'_1} ^ ...,
    dS_i = {z_i, z'_i}. Both also require paths omega_i from z_i to z'_i
    inside S_0 u S_i, read in one of three ways:

    "joint"        some tuple of mutually edge-disjoint paths exists
    "independent"  each path exists on its own
    "ordered"      the paths picked greedily in a fixed path order exist
                   (the family on which the symmetric-difference map acts)
    """
    if reading not in READINGS:
        raise ValueError(f"reading must be one of {READINGS}")
    k = len(pairs)
    if not 1 <= k <= 3:
        raise ValueError("k must be 1, 2 or 3")
    for z, zp in pairs:
        if z == zp:
            raise ValueError("pairs need z != z'")
    check_switching_budget(mc.n_edges, k + 1)
    bnd = _boundary_table(mc.edge_ends)
    V = _as_mask(V)
    if reading == "ordered":
        accept = _OrderedPaths(mc, pairs).accepts
    else:
        paths = _PathCache(mc)

        def accept(S0, parts):
            options = [paths.get(z, zp, S0 | S) for (z, zp), S in zip(pairs, parts)]
            return _disjoint_tuple_exists(options) if reading == "joint" else all(options)

    lhs = _family_size(mc, bnd, V, [0] * k, pairs, accept)
    t0 = V
    for z, zp in pairs:
        t0 ^= pair_sources(z, zp)
    rhs = _family_size(mc, bnd, t0, [pair_sources(z, zp) for z, zp in pairs], pairs, accept)
    return lhs, rhs


def path_instance(N=(3, 3, 1, 5, 1)):
    """Path 0-1-...-len(N) carrying the current N, one bond per step."""
    n = len(N)
    g = build_graph("custom", bonds=[(i, i + 1) for i in range(n)], n_sites=n + 1,
                    name=f"path-{n + 1}")
    return MultiCurrent(g, tuple(N))


def random_multicurrent(rng, max_sites=5, max_bonds=5, max_total=10, max_per_bond=4):
    """A random current on a random simple graph with at most ``max_bonds`` bonds."""
    n = int(rng.integers(2, max_sites + 1))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    nb = int(rng.integers(1, min(max_bonds, len(pairs)) + 1))
    pick = sorted(rng.choice(len(pairs), size=nb, replace=False))
    bonds = [pairs[i] for i in pick]
    N = [int(rng.integers(0, max_per_bond + 1)) for _ in bonds]
    while sum(N) > max_total:
        i = int(rng.integers(len(N)))
        if N[i]:
            N[i] -= 1
    g = build_graph("custom", bonds=bonds, n_sites=n, name="random")
    return MultiCurrent(g, tuple(N))


def random_switching_instance(rng, **kw):
    """(mc, A, v, x) with A an arbitrary site subset."""
    mc = random_multicurrent(rng, **kw)
    n = mc.graph.n_sites
    while True:
        A = int(rng.integers(0, 2 ** n))
        v, x = (int(s) for s in rng.integers(0, n, size=2))
        if v != x or not (A >> v) & 1:
            return mc, A, v, x


def random_ghs_bk_instance(rng, k, **kw):
    """(mc, V, pairs); V is the boundary of N, empty, or a random pair."""
    mc = random_multicurrent(rng, **kw)
    n = mc.graph.n_sites
    pairs = []
    for _ in range(k):
        z, zp = (int(s) for s in rng.choice(n, size=2, replace=False))
        pairs.append((z, zp))
    kind = int(rng.integers(3))
    if kind == 0:
        V = mc.sources()
    elif kind == 1:
        V = 0
    else:
        a, b = (int(s) for s in rng.choice(n, size=2, replace=False))
        V = pair_sources(a, b)
    return mc, V, pairs
