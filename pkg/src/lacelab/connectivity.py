"""Connectivity events on positivity masks.

A positivity mask is an int whose bit i is set when bond i carries a
positive (combined) current. Site sets are int bitmasks too. The scalar
functions follow the definitions directly. ``ComponentTable`` and
``event_tables`` evaluate the same events for all 2^B masks at once with
numpy, which is what the expansion sums use.

"off b" is read as deletion of b. Connectivity is monotone in bond
positivity, so an event that must survive both zeroing and raising n_b
holds exactly when it holds with b deleted.
"""
import numpy as np

from .currents import site_mask


def _adjacency(graph, mask, within):
    adj = [[] for _ in range(graph.n_sites)]
    for i, (u, v) in enumerate(graph.bonds):
        if (mask >> i) & 1 and (within >> u) & 1 and (within >> v) & 1:
            adj[u].append(v)
            adj[v].append(u)
    return adj


def cluster(graph, mask, x, within=None):
    """Site bitmask reachable from x through positive bonds inside ``within``."""
    within = graph.full_mask if within is None else site_mask(within)
    if not (within >> x) & 1:
        return 0
    adj = _adjacency(graph, mask, within)
    seen = 1 << x
    stack = [x]
    while stack:
        a = stack.pop()
        for b in adj[a]:
            if not (seen >> b) & 1:
                seen |= 1 << b
                stack.append(b)
    return seen


def connected(graph, mask, x, y, within=None):
    """x = y in ``within``, or a positive path with all endpoints in ``within``."""
    return bool((cluster(graph, mask, x, within) >> y) & 1)


def connected_through(graph, mask, x, y, A):
    """Connected in the whole graph but not inside the complement of A."""
    A = site_mask(A)
    return connected(graph, mask, x, y) and not connected(graph, mask, x, y, graph.full_mask & ~A)


def _bond_index(graph, b):
    u, v = b
    for i, (a, c) in enumerate(graph.bonds):
        if {a, c} == {u, v}:
            return i
    raise KeyError(f"no bond {b}")


def cluster_off_bond(graph, mask, x, b):
    """Cluster of x with bond b (index or endpoint pair) deleted."""
    i = b if isinstance(b, (int, np.integer)) else _bond_index(graph, b)
    return cluster(graph, mask & ~(1 << int(i)), x)


def pivotal_bonds_from(graph, mask, x, y):
    """Directed pivotal bonds (tail, head) for x <-> y from x, ordered from x.

    b = (u, w) is pivotal when u is in the cluster C of x off b and w is
    connected to y inside the complement of C. Pivotal bonds are nested:
    the cluster of x off a later pivotal bond strictly contains the cluster
    off an earlier one, so sorting by that cluster's size gives the order
    in which they are crossed.
    """
    if not connected(graph, mask, x, y):
        return []
    found = []
    for i, (a, c) in enumerate(graph.bonds):
        for u, w in ((a, c), (c, a)):
            C = cluster_off_bond(graph, mask, x, i)
            if not (C >> u) & 1:
                continue
            if connected(graph, mask, w, y, graph.full_mask & ~C):
                found.append((bin(C).count("1"), (u, w)))
    found.sort()
    return [b for _, b in found]


def doubly_connected(graph, mask, x, y):
    return connected(graph, mask, x, y) and not pivotal_bonds_from(graph, mask, x, y)


def event_E(graph, mask, v, x, A):
    """Connected through A with no pivotal bond whose tail v reaches through A."""
    if not connected_through(graph, mask, v, x, A):
        return False
    return not any(connected_through(graph, mask, v, u, A)
                   for u, _ in pivotal_bonds_from(graph, mask, v, x))


def event_Eprime(graph, mask, z, x, A):
    return connected_through(graph, mask, z, x, A) and doubly_connected(graph, mask, z, x)


def event_Edoubleprime(graph, mask, z, x, v, A):
    return event_Eprime(graph, mask, z, x, A) and connected(graph, mask, z, v)


class ComponentTable:
    """comp[Q, s]: site bitmask of the component of s in the graph with bond set Q."""

    def __init__(self, graph):
        self.graph = graph
        nb, n = graph.n_bonds, graph.n_sites
        comp = np.zeros((2 ** nb, n), dtype=np.int64)
        comp[0] = 1 << np.arange(n)
        # adding bond b to Q merges the two components it touches
        for b, (u, v) in enumerate(graph.bonds):
            lo = comp[: 2 ** b]
            merged = lo[:, u] | lo[:, v]
            hit = ((lo >> u) & 1).astype(bool) | ((lo >> v) & 1).astype(bool)
            comp[2 ** b: 2 ** (b + 1)] = np.where(hit, merged[:, None], lo)
        self.comp = comp
        self.masks = np.arange(2 ** nb, dtype=np.int64)

    def of(self, Q, s):
        return self.comp[Q, s]


def event_tables(table, v, A):
    """Per-mask site sets for events rooted at v, for every positivity mask P.

    Returns (through, E, double) as int64 arrays over P:
      through[P]: sites y with v connected to y through A,
      E[P]:       sites y for which E(v, y; A) holds,
      double[P]:  sites y doubly connected to v.
    """
    g = table.graph
    A = site_mask(A)
    Ac = g.full_mask & ~A
    P = table.masks
    comp = table.comp
    compv = comp[P, v]
    if (Ac >> v) & 1:
        inside = comp[P & g.bonds_within(Ac), v] & Ac
    else:
        inside = np.zeros_like(compv)
    through = compv & ~inside
    E = through.copy()
    double = compv.copy()
    for b, (a, c) in enumerate(g.bonds):
        bit = 1 << b
        Cb = comp[P & ~bit, v]
        bridge = ((P & bit) != 0) & (Cb != compv)
        tail = np.where((Cb >> a) & 1, a, c)
        tail_through = ((through >> tail) & 1).astype(bool)
        E = np.where(bridge & tail_through, E & Cb, E)
        double = np.where(bridge, double & Cb, double)
    return through, E, double
