"""Random-current sums through the per-bond ternary reduction.

Every event used downstream reads a current only through the parity and
the positivity of each n_b, so integer currents are summed bond by bond
into three classes with weights 1, cosh(pJ)-1 and sinh(pJ).

Two routes are provided. The visitor sweeps walk the classes in
lexicographic order and hand each one to a callback. The source tables
fold the same sums into arrays indexed by (positivity mask, source set)
with a short dynamic programme over bonds; the expansion code uses these.
"""
import itertools
import math
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .lattice import check_pair_budget, check_single_budget


class BondState(IntEnum):
    ZERO = 0
    EVEN = 1  # even and positive
    ODD = 2


def state_weights(p, J):
    """Marginal weights (zero, even-positive, odd) of one bond."""
    x = p * J
    return 1.0, 2.0 * math.sinh(0.5 * x) ** 2, math.sinh(x)


def site_mask(sites):
    if sites is None:
        return None
    if isinstance(sites, (int, np.integer)):
        return int(sites)
    m = 0
    for s in sites:
        m ^= 1 << int(s)
    return m


def pair_sources(x, y):
    """Bitmask of the symmetric difference {x} ^ {y}; empty when x == y."""
    return (1 << x) ^ (1 << y)


def sources_of(graph, odd_mask):
    ends = graph.endpoint_masks()
    out = 0
    for i, e in enumerate(ends):
        if (odd_mask >> i) & 1:
            out ^= e
    return out


def _support_list(graph, support):
    if support is None:
        return list(range(graph.n_bonds))
    if isinstance(support, (int, np.integer)):
        return [i for i in range(graph.n_bonds) if (support >> i) & 1]
    return sorted(set(int(b) for b in support))


class CurrentClass(NamedTuple):
    states: tuple      # BondState per bond (Zero outside the support)
    positive: int      # bitmask of bonds with positive current
    odd: int           # bitmask of bonds with odd current
    sources: int       # bitmask of source sites


class CurrentPair(NamedTuple):
    m: CurrentClass
    n: CurrentClass
    positive: int      # combined positivity of m+n
    odd: int           # combined parity of m+n


def _sweep(graph, p, support):
    """Yield (CurrentClass, weight) over the support in lexicographic order."""
    bonds = _support_list(graph, support)
    check_single_budget(len(bonds))
    wts = [state_weights(p, graph.couplings[b]) for b in bonds]
    ends = graph.endpoint_masks()
    nb = graph.n_bonds
    for combo in itertools.product((0, 1, 2), repeat=len(bonds)):
        states = [BondState.ZERO] * nb
        w = 1.0
        pos = odd = src = 0
        for b, s, ws in zip(bonds, combo, wts):
            if s:
                states[b] = BondState(s)
                pos |= 1 << b
                if s == 2:
                    odd |= 1 << b
                    src ^= ends[b]
            w *= ws[s]
        yield CurrentClass(tuple(states), pos, odd, src), w


def enumerate_currents(graph, p, support=None, sources=None, visitor=None):
    """Sum visitor(cls, weight) over current classes with the given sources.

    ``support`` is a bond list or bitmask (default: all bonds), ``sources``
    a site list or bitmask (None: any source set). The default visitor
    returns the weight itself, giving the unnormalised current sum.
    """
    want = site_mask(sources)
    vals = []
    for cls, w in _sweep(graph, p, support):
        if want is not None and cls.sources != want:
            continue
        vals.append(w if visitor is None else visitor(cls, w))
    return math.fsum(vals)


def partition_function_currents(graph, p, restriction=None):
    """Z_A as the sourceless current sum on the bonds inside A."""
    mask = graph.full_mask if restriction is None else site_mask(restriction)
    return enumerate_currents(graph, p, support=graph.bonds_within(mask), sources=0)


def source_sums(graph, p, support=None):
    """Unnormalised current sums for every source set, in one sweep."""
    buckets = {}
    for cls, w in _sweep(graph, p, support):
        buckets.setdefault(cls.sources, []).append(w)
    out = np.zeros(2 ** graph.n_sites)
    for s, ws in buckets.items():
        out[s] = math.fsum(ws)
    return out


def two_point_via_currents(graph, p, x, y, restriction=None):
    """sum_{dn = x^y} w / sum_{dn = 0} w on the subgraph induced by ``restriction``."""
    mask = graph.full_mask if restriction is None else site_mask(restriction)
    if not ((mask >> x) & 1 and (mask >> y) & 1):
        return 0.0
    if x == y:
        return 1.0
    support = graph.bonds_within(mask)
    num = enumerate_currents(graph, p, support, pair_sources(x, y))
    den = enumerate_currents(graph, p, support, 0)
    return num / den


def two_point_matrix_currents(graph, p):
    sums = source_sums(graph, p)
    n = graph.n_sites
    G = np.eye(n)
    for a in range(n):
        for b in range(a + 1, n):
            G[a, b] = G[b, a] = sums[pair_sources(a, b)] / sums[0]
    return G


def enumerate_current_pairs(graph, p, A, sources_m=0, sources_n=0, visitor=None):
    """Sum visitor(pair, weight) over current pairs (m, n).

    m lives on the bonds inside the complement of A, n on all bonds. The
    weight is w(m) w(n) / (Z_{A^c} Z_Lambda). Sweeps run m outer, n inner.
    """
    A = site_mask(A)
    Ac = graph.full_mask & ~A
    sm, sn = site_mask(sources_m), site_mask(sources_n)
    if sm & ~Ac:
        raise ValueError("m-sources must lie in the complement of A")
    check_pair_budget(graph.n_bonds)
    m_support = graph.bonds_within(Ac)
    z_ac = partition_function_currents(graph, p, Ac)
    z = partition_function_currents(graph, p)
    n_list = [(c, w) for c, w in _sweep(graph, p, None) if c.sources == sn]
    vals = []
    for mc, mw in _sweep(graph, p, m_support):
        if mc.sources != sm:
            continue
        for nc, nw in n_list:
            w = mw * nw / (z_ac * z)
            pair = CurrentPair(mc, nc, mc.positive | nc.positive, mc.odd ^ nc.odd)
            vals.append(w if visitor is None else visitor(pair, w))
    return math.fsum(vals)


def _fold(table, ends, w0, we, wo):
    """Append one bond to a (positivity, sources) table."""
    n_src = table.shape[1]
    flip = np.arange(n_src) ^ ends
    out = np.empty((2 * table.shape[0], n_src))
    out[: table.shape[0]] = w0 * table
    out[table.shape[0]:] = we * table + wo * table[:, flip]
    return out


def source_table(graph, p, support=None):
    """T[P, S] = sum of w(n) over classes on ``support`` with positive set P and sources S.

    Bonds outside the support are forced to Zero. Shape (2^B, 2^N).
    """
    bonds = set(_support_list(graph, support))
    ends = graph.endpoint_masks()
    T = np.zeros((1, 2 ** graph.n_sites))
    T[0, 0] = 1.0
    for b in range(graph.n_bonds):
        if b in bonds:
            w0, we, wo = state_weights(p, graph.couplings[b])
        else:
            w0, we, wo = 1.0, 0.0, 0.0
        T = _fold(T, ends[b], w0, we, wo)
    return T


def even_subsets(graph, bond_mask):
    """Bond subsets of ``bond_mask`` with empty boundary (the cycle space)."""
    ends = graph.endpoint_masks()
    members = [b for b in range(graph.n_bonds) if (bond_mask >> b) & 1]
    out = []
    for k in range(2 ** len(members)):
        sub = src = 0
        for i, b in enumerate(members):
            if (k >> i) & 1:
                sub |= 1 << b
                src ^= ends[b]
        if src == 0:
            out.append(sub)
    return out


def pair_table(graph, p, A):
    """T[P, S] = sum over pairs with dm = 0, dn = S and combined positivity P.

    m lives on the bonds inside A^c. Weights are normalised by
    Z_{A^c} Z_Lambda. The m-parity pattern is summed over the cycle space
    of B_{A^c}; for each pattern the per-bond (m, n) weights are
      m odd:  n even -> sinh*cosh, n odd -> sinh^2 (always positive)
      m even: zero -> 1, positive with n even -> cosh^2-1 = sinh^2, n odd -> cosh*sinh
    and bonds outside B_{A^c} carry the single-current weights.
    """
    A = site_mask(A)
    Ac = graph.full_mask & ~A
    M = graph.bonds_within(Ac)
    ends = graph.endpoint_masks()
    total = np.zeros((2 ** graph.n_bonds, 2 ** graph.n_sites))
    for odd_m in even_subsets(graph, M):
        T = np.zeros((1, 2 ** graph.n_sites))
        T[0, 0] = 1.0
        for b in range(graph.n_bonds):
            _, ce, s = state_weights(p, graph.couplings[b])
            c = ce + 1.0
            if (odd_m >> b) & 1:
                w0, we, wo = 0.0, s * c, s * s
            elif (M >> b) & 1:
                w0, we, wo = 1.0, s * s, c * s
            else:
                w0, we, wo = 1.0, ce, s
            T = _fold(T, ends[b], w0, we, wo)
        total += T
    z_ac = math.fsum(source_table(graph, p, M)[:, 0])
    z = math.fsum(source_table(graph, p)[:, 0])
    return total / (z_ac * z)
