import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lacelab import lattice as lt
from lacelab.lattice import CATALOG, BudgetExceeded, GraphSpec, build_graph, resolve_graph


def test_custom_single_bond():
    g = build_graph("custom", bonds=[(0, 1)], couplings=[1.0])
    assert g.n_sites == 2 and g.n_bonds == 1


def test_spread_out_d2_L1_uniform_eighth():
    g = build_graph("spread-out", d=2, side=3, L=1)
    centre = g.coords.index((1, 1))
    Js = [J for b, J in zip(g.bonds, g.couplings) if centre in b]
    assert len(Js) == 8
    assert all(J == pytest.approx(1 / 8, abs=1e-15) for J in Js)


def test_nn_d1_side3_is_path():
    g = build_graph("nn", d=1, side=3)
    assert g.bonds == ((0, 1), (1, 2))
    assert g.couplings == (1.0, 1.0)


@pytest.mark.parametrize("bonds,n,origin", [
    ([(0, 0)], 2, 0),               # self loop
    ([(0, 1), (1, 0)], 2, 0),       # duplicate
    ([(0, 5)], 2, 0),               # endpoint missing
    ([(0, 1)], 2, 7),               # origin missing
])
def test_graphspec_rejects_bad_input(bonds, n, origin):
    with pytest.raises(ValueError):
        GraphSpec(n, tuple(bonds), tuple([1.0] * len(bonds)), origin)


def test_exact_flag_rejects_large_box():
    with pytest.raises(BudgetExceeded):
        build_graph("nn", d=2, side=6, exact=True)
    build_graph("nn", d=2, side=3, exact=True)


def test_spread_out_range_validated():
    with pytest.raises(ValueError):
        build_graph("spread-out", d=1, side=2, L=2)


def test_budget_env(monkeypatch):
    monkeypatch.setenv("LACELAB_BUDGET", "100")
    assert lt.get_budget().single_states == 100
    with pytest.raises(BudgetExceeded):
        lt.check_single_budget(5)
    monkeypatch.setenv("LACELAB_BUDGET", json.dumps({"pair_states": 10}))
    b = lt.get_budget()
    assert b.pair_states == 10 and b.single_states == 1e8
    monkeypatch.setenv("LACELAB_BUDGET", "not json")
    with pytest.raises(ValueError):
        lt.get_budget()


def test_nn_stencil_step_distribution():
    for d in (1, 2, 3):
        sd = lt.step_distribution(lt.lattice_stencil("nn", d), 0.7)
        assert len(sd.D) == 2 * d
        assert all(v == pytest.approx(1 / (2 * d), abs=1e-15) for v in sd.D.values())
        assert sd.sigma2 == pytest.approx(1.0, abs=1e-14)


def test_spread_out_d1_L2_stencil():
    sd = lt.step_distribution(lt.lattice_stencil("spread-out", 1, L=2), 0.3)
    assert sorted(sd.D) == [(-2,), (-1,), (1,), (2,)]
    assert all(v == pytest.approx(0.25, abs=1e-15) for v in sd.D.values())
    assert sd.sigma2 == pytest.approx(2.5, abs=1e-14)


def test_single_bond_tau_total():
    sd = lt.step_distribution(CATALOG["single-bond"], 1.0)
    assert sd.tau_total == pytest.approx(math.tanh(1.0), abs=1e-15)


def test_step_distribution_p0_sentinel_and_negative_p():
    sd = lt.step_distribution(CATALOG["triangle"], 0.0)
    assert sd.tau_total == 0.0 and not sd.defined
    with pytest.raises(ValueError):
        lt.step_distribution(CATALOG["triangle"], -0.1)


def test_tau_bond_values():
    assert lt.tau_bond(0.0, 5.0) == 0.0
    assert lt.tau_bond(1.0, 1.0) == pytest.approx(0.7615941559557649, abs=1e-15)
    assert lt.tau_bond(1.0, -1.0) == -lt.tau_bond(1.0, 1.0)


@given(st.floats(0.0, 5.0), st.floats(1e-3, 5.0), st.floats(-3.0, 3.0))
def test_tau_bond_odd_bounded_monotone(p, dp, J):
    t = lt.tau_bond(p, J)
    assert -1 < t < 1 or abs(t) == 1.0  # tanh saturates in floating point
    assert lt.tau_bond(p, -J) == -t
    if J > 0:
        assert lt.tau_bond(p + dp, J) >= t


@given(st.sampled_from(["nn", "spread-out"]), st.integers(1, 3), st.floats(0.01, 3.0),
       st.data())
def test_step_distribution_symmetry(kind, d, p, data):
    L = data.draw(st.integers(1, 2)) if kind == "spread-out" else 1
    sd = lt.step_distribution(lt.lattice_stencil(kind, d, L), p)
    assert math.fsum(sd.D.values()) == pytest.approx(1.0, abs=1e-12)
    assert all(v >= 0 for v in sd.D.values())
    perm = data.draw(st.permutations(range(d)))
    signs = data.draw(st.lists(st.sampled_from([1, -1]), min_size=d, max_size=d))
    for x, v in sd.D.items():
        y = tuple(signs[i] * x[perm[i]] for i in range(d))
        assert sd.D[y] == pytest.approx(v, abs=1e-15)


def test_coupling_map_keys_match_bonds():
    for g in CATALOG.values():
        assert set(g.coupling_map) == set(g.bonds)


def test_catalog_contents():
    names = [e["name"] for e in lt.list_catalog()]
    assert names == ["single-bond", "path-3", "triangle", "square", "square-diag", "K4",
                     "box-2x2", "box-2x3"]
    by = {e["name"]: e for e in lt.list_catalog()}
    assert by["triangle"]["bonds"] == 3 and by["triangle"]["single_states"] == 27
    assert by["K4"]["bonds"] == 6 and by["K4"]["pair_states"] == 531441


def test_resolve_graph_file(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps([{"name": "bow", "sites": 3, "bonds": [[0, 1, 1.0], [1, 2, -0.5]],
                                 "origin": 1}]))
    g = resolve_graph(str(path))
    assert g.name == "bow" and g.origin == 1 and g.couplings == (1.0, -0.5)
    assert resolve_graph(f"{path}:bow") == g
    with pytest.raises(KeyError):
        resolve_graph("no-such-graph")


def test_random_mixed_couplings_have_both_signs():
    rng = np.random.default_rng(3)
    for g in CATALOG.values():
        m = lt.random_mixed_couplings(g, rng)
        J = np.array(m.couplings)
        assert m.bonds == g.bonds
        if g.n_bonds > 1:
            assert (J > 0).any() and (J < 0).any()
        else:
            assert J[0] < 0
