import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lacelab import diagrams as dg
from lacelab import expansion as ex
from lacelab.lattice import CATALOG

ferro = ["single-bond", "path-3", "triangle", "square", "square-diag", "K4", "box-2x2", "box-2x3"]


def test_tilde_G_examples():
    g = CATALOG["single-bond"]
    assert np.all(dg.tilde_G(g, 0.0) == 0.0)
    assert dg.tilde_G(g, 0.7)[0, 1] == pytest.approx(math.tanh(0.7), rel=1e-15)


@pytest.mark.parametrize("name", ferro)
@pytest.mark.parametrize("p", [0.2, 0.5, 1.0])
def test_G_below_delta_plus_tilde_G(name, p):
    g = CATALOG[name]
    G = dg.two_point(g, p)
    assert np.all(np.eye(g.n_sites) + dg.tilde_G(g, p) - G >= -1e-12)


def test_psi_single_bond_by_hand():
    g = CATALOG["single-bond"]
    for p in (0.2, 0.6):
        t = math.tanh(p)
        # G~ = [[t^2, t], [t, t^2]], B = G~^2 entrywise, psi = (I - B)^-1
        det = (1 - t ** 4) ** 2 - t ** 4
        want = np.array([[1 - t ** 4, t ** 2], [t ** 2, 1 - t ** 4]]) / det
        assert np.allclose(dg.psi(g, p), want, rtol=1e-13, atol=0)


def test_psi_p0_identity_and_divergence():
    assert np.array_equal(dg.psi(CATALOG["K4"], 0.0), np.eye(4))
    with pytest.raises(dg.PsiDivergent):
        dg.psi(CATALOG["K4"], 0.5)


@pytest.mark.parametrize("name", ferro)
def test_psi_solve_matches_series(name):
    g = CATALOG[name]
    for p in (0.05, 0.1, 0.2):
        if dg.bubble_radius(g, p) > 0.9:
            continue
        ps = dg.psi(g, p)
        assert np.allclose(ps, dg.psi_series(g, p, terms=400), atol=1e-10, rtol=0)
        assert np.all(np.diag(ps) >= 1)


def test_ladder_factor_counts():
    for j in range(1, 6):
        bubbles, twos, first, last, pref = dg.ladder_factors(j)
        assert len(bubbles) == j
        assert len(twos) == 2 * j - 1
    with pytest.raises(ValueError):
        dg.ladder_factors(0)


def test_P1_vanishes_at_p0():
    kit = dg.DiagramKit(CATALOG["triangle"], 0.0)
    assert np.all(kit.P(1) == 0.0)


def test_P_prime0_literal():
    kit = dg.DiagramKit(CATALOG["square-diag"], 0.2)
    G = kit.G
    P0 = kit.P_prime(0)
    for y in range(4):
        for x in range(4):
            for u in range(4):
                assert P0[y, x, u] == pytest.approx(G[y, x] ** 2 * G[y, u] * G[u, x], rel=1e-15)
            assert P0[y, x, y] == pytest.approx(G[y, x] ** 3, rel=1e-15)


def test_P_dprime0_literal_with_v_equal_x():
    kit = dg.DiagramKit(CATALOG["triangle"], 0.2)
    G, ps = kit.G, kit.psi
    P0 = kit.P_dprime(0)
    n = kit.n
    for y in range(n):
        for x in range(n):
            for u in range(n):
                want = G[y, x] * G[y, u] * G[u, x] * sum(G[y, k] * G[k, x] * ps[k, x] for k in range(n))
                assert P0[y, x, u, x] == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("name", ["triangle", "square", "path-3", "box-2x2"])
def test_transfer_series_matches_explicit_contraction(name):
    kit = dg.DiagramKit(CATALOG[name], 0.2)
    tp = kit.P_prime_terms()
    tdp = kit.P_dprime_terms()
    for j in range(1, 5):
        assert np.allclose(tp[j - 1], kit.P_prime(j), rtol=1e-12, atol=1e-18)
        assert np.allclose(tdp[j - 1], kit.P_dprime(j), rtol=1e-12, atol=1e-18)


@pytest.mark.parametrize("name", ["triangle", "square-diag", "box-2x2"])
def test_replacement_dominates_plain_ladder(name):
    kit = dg.DiagramKit(CATALOG[name], 0.2)
    for j in range(1, 4):
        summed = kit.P_prime(j).sum(axis=2)
        assert np.all(summed - (2 * j - 1) * kit.P(j) >= -1e-15)


@pytest.mark.parametrize("name", ferro)
def test_kernels_nonnegative(name):
    g = CATALOG[name]
    kit = dg.DiagramKit(g, 0.2)
    for arr in (kit.G, kit.tG, kit.psi, kit.P(1), kit.P(2), kit.P_prime_sum()[0],
                kit.P_dprime_sum()[0], kit.Q_prime(), kit.Q_dprime()):
        assert np.all(arr >= 0)
    assert kit.converged


def test_Q_prime_at_p0():
    kit = dg.DiagramKit(CATALOG["triangle"], 0.0)
    Q = kit.Q_prime()
    assert Q[1, 1, 1] == 1.0
    assert np.array_equal(Q, kit.P_prime(0))
    assert np.array_equal(kit.Q_dprime(), kit.P_dprime(0))


def test_pi_bound_j0_and_origin_margin():
    for name in ferro:
        g = CATALOG[name]
        m = dg.verify_diagrammatic_bounds(g, 0.3, 0)
        assert m[g.origin] == pytest.approx(0.0, abs=1e-15)
        assert np.all(m >= -1e-12)


def test_refuses_mixed_signs():
    g = CATALOG["triangle"].with_couplings((1.0, -1.0, 1.0))
    with pytest.raises(ValueError):
        dg.verify_diagrammatic_bounds(g, 0.3, 1)
    with pytest.raises(ValueError):
        dg.verify_aux_bounds(g, 0.3, [1], 0, 1, 2)


def test_diverged_psi_reports_infinite_margins():
    m = dg.verify_diagrammatic_bounds(CATALOG["triangle"], 0.5, 1)
    assert np.all(np.isinf(m))


def test_aux_bounds_empty_A():
    g = CATALOG["triangle"]
    eng = ex.engine(g, 0.2)
    for y in range(3):
        for x in range(3):
            m = dg.verify_aux_bounds(g, 0.2, 0, y, x, 2)
            assert eng.theta_vector(y, 0)[x] == 0.0
            assert min(m.values()) >= 0.0


def test_aux_bound_origin_branch():
    g = CATALOG["square"]
    m = dg.verify_aux_bounds(g, 0.2, [1], 0, 0, 0)
    assert m["pi0_conn"] == pytest.approx(0.0, abs=1e-15)


@given(st.sampled_from(["triangle", "square", "path-3", "square-diag"]),
       st.sampled_from([0.1, 0.2, 0.3]), st.data())
def test_aux_bounds_hold(name, p, data):
    g = CATALOG[name]
    A = data.draw(st.integers(0, g.full_mask))
    y, x, v = (data.draw(st.integers(0, g.n_sites - 1)) for _ in range(3))
    m = dg.verify_aux_bounds(g, p, A, y, x, v)
    assert min(m.values()) >= -1e-9


@pytest.mark.parametrize("name", ["triangle", "square", "square-diag", "box-2x2"])
def test_full_bound_first_and_second_order(name):
    g = CATALOG[name]
    for j in (1, 2):
        assert np.all(dg.verify_diagrammatic_bounds(g, 0.2, j) >= -1e-9)
