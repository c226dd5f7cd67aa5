"""Spin-sum oracle against closed forms, and the current sums against the spin sums."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lacelab import currents as cu
from lacelab import spin_oracle as so
from lacelab.lattice import CATALOG, build_graph

ferro_graphs = st.sampled_from(["single-bond", "path-3", "triangle", "square", "square-diag", "K4"])


def coupled(name, Js):
    g = CATALOG[name]
    return g.with_couplings(Js[: g.n_bonds])


couplings = st.lists(st.floats(-2.0, 2.0), min_size=6, max_size=6)


# spin oracle

def test_single_site_and_empty():
    g = build_graph("custom", bonds=[], n_sites=1)
    assert so.partition_function(g, 1.3) == 1.0
    assert so.partition_function(CATALOG["triangle"], 1.0, restriction=[]) == 1.0


@pytest.mark.parametrize("t", [0.2, 0.5, 1.0, -0.7])
def test_single_bond_closed_form(t):
    g = CATALOG["single-bond"]
    assert so.partition_function(g, t) == pytest.approx(math.cosh(t), rel=1e-14)
    assert so.two_point(g, t, 0, 1) == pytest.approx(math.tanh(t), rel=1e-14)


@pytest.mark.parametrize("t", [0.2, 0.5, 1.0])
def test_triangle_closed_form(t):
    g = CATALOG["triangle"]
    c, s = math.cosh(t), math.sinh(t)
    Z = (2 * math.exp(3 * t) + 6 * math.exp(-t)) / 8
    assert Z == pytest.approx(c ** 3 + s ** 3, rel=1e-14)
    assert so.partition_function(g, t) == pytest.approx(Z, rel=1e-14)
    G = s * c * (c + s) / (c ** 3 + s ** 3)
    assert so.two_point(g, t, 0, 1) == pytest.approx(G, rel=1e-13)


def test_path_is_product_of_tanh():
    assert so.two_point(CATALOG["path-3"], 0.6, 0, 2) == pytest.approx(math.tanh(0.6) ** 2, rel=1e-14)


def test_two_point_conventions():
    g = CATALOG["square"]
    assert so.two_point(g, 0.4, 2, 2) == 1.0
    assert so.two_point(g, 0.4, 0, 2, restriction=[1, 2, 3]) == 0.0
    assert so.two_point(g, 0.4, 1, 1, restriction=[1]) == 1.0
    with pytest.raises(ValueError):
        so.two_point(g, 0.4, 0, 9)


def test_monotonicity_examples():
    g = CATALOG["triangle"]
    assert so.two_point_monotonicity_check(g, 0.7, [], 0, 1) == 0.0
    assert so.two_point_monotonicity_check(CATALOG["single-bond"], 0.7, [0], 1, 1) == 0.0
    m = so.two_point_monotonicity_check(g, 0.7, [2], 0, 1)
    assert m == pytest.approx(so.two_point(g, 0.7, 0, 1) - math.tanh(0.7), abs=1e-15)
    assert m > 0
    with pytest.raises(ValueError):
        so.two_point_monotonicity_check(g.with_couplings((1.0, -1.0, 1.0)), 0.7, [2], 0, 1)


@given(ferro_graphs, couplings, st.floats(0.0, 2.0))
def test_two_point_range(name, Js, p):
    g = coupled(name, Js)
    G = so.two_point_matrix(g, p)
    assert np.all(np.abs(G) <= 1 + 1e-15)
    assert np.allclose(G, G.T, atol=0)
    gf = CATALOG[name]
    assert np.all(so.two_point_matrix(gf, p) >= -1e-15)


@given(ferro_graphs, st.floats(0.0, 1.5), st.floats(1e-3, 1.0))
def test_griffiths_monotone_in_p(name, p, dp):
    g = CATALOG[name]
    assert np.all(so.two_point_matrix(g, p + dp) - so.two_point_matrix(g, p) >= -1e-12)


@given(ferro_graphs, couplings, st.floats(0.0, 2.0), st.data())
def test_restriction_equals_standalone_subgraph(name, Js, p, data):
    g = coupled(name, Js)
    A = sorted(data.draw(st.sets(st.integers(0, g.n_sites - 1), min_size=1)))
    pos = {s: i for i, s in enumerate(A)}
    bonds, J = [], []
    for (u, v), c in zip(g.bonds, g.couplings):
        if u in pos and v in pos:
            bonds.append((pos[u], pos[v]))
            J.append(c)
    sub = build_graph("custom", bonds=bonds, couplings=J, n_sites=len(A))
    assert so.partition_function(g, p, restriction=A) == pytest.approx(
        so.partition_function(sub, p), rel=1e-13)
    Gr = so.two_point_matrix(g, p, restriction=A)
    Gs = so.two_point_matrix(sub, p)
    assert np.allclose(Gr[np.ix_(A, A)], Gs, rtol=1e-12, atol=1e-15)


# currents

def test_state_weights():
    w0, we, wo = cu.state_weights(0.8, 1.5)
    assert (w0, we, wo) == pytest.approx((1.0, math.cosh(1.2) - 1, math.sinh(1.2)), rel=1e-14)


def test_single_bond_current_sums():
    g = CATALOG["single-bond"]
    t = 0.9
    assert cu.enumerate_currents(g, t, sources=[]) == pytest.approx(math.cosh(t), rel=1e-15)
    assert cu.enumerate_currents(g, t, sources=[0, 1]) == pytest.approx(math.sinh(t), rel=1e-15)
    assert cu.enumerate_currents(g, t, sources=[0]) == 0.0
    assert cu.two_point_via_currents(g, t, 0, 1) == pytest.approx(math.tanh(t), rel=1e-14)
    assert cu.two_point_via_currents(g, t, 1, 1) == 1.0


def test_triangle_currents_match_spin():
    g = CATALOG["triangle"]
    for t in (0.2, 0.5, 1.0):
        assert cu.two_point_via_currents(g, t, 0, 1) == pytest.approx(so.two_point(g, t, 0, 1), rel=1e-12)


def test_pair_sweep_examples():
    g = CATALOG["triangle"]
    p = 0.7
    # A = everything: m is forced to zero and the n-sum is normalised
    assert cu.enumerate_current_pairs(g, p, g.full_mask, 0, 0) == pytest.approx(1.0, rel=1e-14)
    # marginalising m gives the single-current ratio
    v = cu.enumerate_current_pairs(g, p, [0], 0, cu.pair_sources(0, 1))
    assert v == pytest.approx(cu.two_point_via_currents(g, p, 0, 1), rel=1e-13)
    with pytest.raises(ValueError):
        cu.enumerate_current_pairs(g, p, [0], [0, 1], 0)


def test_single_bond_pair_reduces_to_single():
    g = CATALOG["single-bond"]
    seen = []
    cu.enumerate_current_pairs(g, 0.5, [0], 0, 0, lambda pr, w: seen.append(pr.m.positive) or w)
    assert set(seen) == {0}


@given(ferro_graphs, couplings, st.floats(0.0, 2.0))
def test_currents_agree_with_spin_any_sign(name, Js, p):
    g = coupled(name, Js)
    Zs = so.partition_function(g, p)
    Zc = cu.partition_function_currents(g, p)
    assert Zc == pytest.approx(Zs, rel=1e-12)
    assert np.allclose(cu.two_point_matrix_currents(g, p), so.two_point_matrix(g, p),
                       rtol=1e-11, atol=1e-13)


@given(ferro_graphs, couplings, st.floats(0.0, 2.0))
def test_handshake_odd_source_sets_vanish(name, Js, p):
    g = coupled(name, Js)
    sums = cu.source_sums(g, p)
    for S in range(len(sums)):
        if bin(S).count("1") % 2:
            assert sums[S] == 0.0


@given(ferro_graphs, couplings, st.floats(0.0, 1.5), st.data())
def test_source_table_matches_sweep(name, Js, p, data):
    g = coupled(name, Js)
    support = data.draw(st.integers(0, 2 ** g.n_bonds - 1))
    T = cu.source_table(g, p, support)
    for S in range(2 ** g.n_sites):
        ref = cu.enumerate_currents(g, p, support=support, sources=S)
        assert math.fsum(T[:, S]) == pytest.approx(ref, rel=1e-12, abs=1e-14)
    # positivity marginal of the table against the visitor
    for P in range(0, 2 ** g.n_bonds, max(1, 2 ** g.n_bonds // 7)):
        ref = cu.enumerate_currents(g, p, support=support, sources=0,
                                    visitor=lambda c, w: w if c.positive == P else 0.0)
        assert T[P, 0] == pytest.approx(ref, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("name", ["triangle", "square", "square-diag"])
@pytest.mark.parametrize("A", [0, 1, 0b11, 0b101])
def test_pair_table_matches_pair_sweep(name, A):
    g = CATALOG[name]
    p = 0.6
    T = cu.pair_table(g, p, A)
    for S in (0, cu.pair_sources(0, 1), cu.pair_sources(0, 2)):
        for P in range(2 ** g.n_bonds):
            ref = cu.enumerate_current_pairs(g, p, A, 0, S,
                                             lambda pr, w: w if pr.positive == P else 0.0)
            assert T[P, S] == pytest.approx(ref, rel=1e-11, abs=1e-15)


def test_pair_table_mixed_signs():
    g = CATALOG["square"].with_couplings((1.0, -0.6, 0.3, -1.2))
    T = cu.pair_table(g, 0.9, 0b10)
    for S in (0, cu.pair_sources(0, 2)):
        for P in range(16):
            ref = cu.enumerate_current_pairs(g, 0.9, 0b10, 0, S,
                                             lambda pr, w: w if pr.positive == P else 0.0)
            assert T[P, S] == pytest.approx(ref, rel=1e-11, abs=1e-15)


def test_even_subsets_triangle():
    g = CATALOG["triangle"]
    assert sorted(cu.even_subsets(g, 0b111)) == [0, 0b111]
    assert cu.even_subsets(g, 0b011) == [0]
