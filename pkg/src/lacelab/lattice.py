"""Finite graphs, coupling families, the built-in catalog and enumeration budgets."""
import itertools
import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np


class BudgetExceeded(RuntimeError):
    """Raised when an exhaustive sweep would exceed the configured budget."""


@dataclass(frozen=True)
class Budget:
    single_states: float = 1e8
    pair_states: float = 1e8
    spin_sites: int = 24
    switching_assignments: float = 1e8


def get_budget():
    """Budget from the LACELAB_BUDGET environment variable, if set.

    The variable holds either a single number (applied to the single and
    pair state caps) or a JSON object with any of the Budget fields.
    """
    raw = os.environ.get("LACELAB_BUDGET", "").strip()
    if not raw:
        return Budget()
    try:
        val = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"LACELAB_BUDGET is not a number or JSON object: {raw!r}") from exc
    if isinstance(val, (int, float)):
        return Budget(single_states=float(val), pair_states=float(val))
    if isinstance(val, dict):
        return Budget(**val)
    raise ValueError(f"LACELAB_BUDGET has unsupported type: {raw!r}")


def check_single_budget(n_bonds, budget=None):
    budget = budget or get_budget()
    cost = 3 ** n_bonds
    if cost > budget.single_states:
        raise BudgetExceeded(f"single sweep needs 3^{n_bonds}={cost} states > {budget.single_states:g}")
    return cost


def check_pair_budget(n_bonds, budget=None):
    budget = budget or get_budget()
    cost = 9 ** n_bonds
    if cost > budget.pair_states:
        raise BudgetExceeded(f"pair sweep needs 9^{n_bonds}={cost} states > {budget.pair_states:g}")
    return cost


def check_spin_budget(n_sites, budget=None):
    budget = budget or get_budget()
    if n_sites > budget.spin_sites:
        raise BudgetExceeded(f"spin sweep over {n_sites} sites > {budget.spin_sites}")
    return 2 ** n_sites


def check_switching_budget(n_edges, parts, budget=None):
    """Assignments of n_edges labeled edges to ``parts`` subgraphs."""
    budget = budget or get_budget()
    cost = parts ** n_edges
    if cost > budget.switching_assignments:
        raise BudgetExceeded(f"switching sweep needs {parts}^{n_edges}={cost} assignments "
                             f"> {budget.switching_assignments:g}")
    return cost


@dataclass(frozen=True)
class GraphSpec:
    """Finite graph with real couplings and a distinguished origin.

    Sites are the integers 0..n_sites-1. ``couplings[i]`` belongs to
    ``bonds[i]``. ``coords`` optionally embeds each site in Z^d.
    """
    n_sites: int
    bonds: tuple
    couplings: tuple
    origin: int = 0
    coords: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("graph needs at least one site")
        if len(self.bonds) != len(self.couplings):
            raise ValueError("bonds and couplings differ in length")
        seen = set()
        for u, v in self.bonds:
            if u == v:
                raise ValueError(f"self-loop at site {u}")
            if not (0 <= u < self.n_sites and 0 <= v < self.n_sites):
                raise ValueError(f"bond ({u},{v}) has an endpoint outside the site list")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate bond {key}")
            seen.add(key)
        if not 0 <= self.origin < self.n_sites:
            raise ValueError(f"origin {self.origin} is not a site")
        if self.coords is not None and len(self.coords) != self.n_sites:
            raise ValueError("coords must list one point per site")

    @property
    def sites(self):
        return list(range(self.n_sites))

    @property
    def n_bonds(self):
        return len(self.bonds)

    @property
    def coupling_map(self):
        return {(min(u, v), max(u, v)): J for (u, v), J in zip(self.bonds, self.couplings)}

    def coupling(self, u, v):
        return self.coupling_map.get((min(u, v), max(u, v)), 0.0)

    @property
    def ferromagnetic(self):
        return all(J >= 0 for J in self.couplings)

    @property
    def full_mask(self):
        return (1 << self.n_sites) - 1

    def endpoint_masks(self):
        return [(1 << u) | (1 << v) for u, v in self.bonds]

    def bonds_within(self, site_mask):
        """Bitmask over bonds with both endpoints in ``site_mask``."""
        out = 0
        for i, (u, v) in enumerate(self.bonds):
            if (site_mask >> u) & 1 and (site_mask >> v) & 1:
                out |= 1 << i
        return out

    def tau_matrix(self, p):
        t = np.zeros((self.n_sites, self.n_sites))
        for (u, v), J in zip(self.bonds, self.couplings):
            t[u, v] = t[v, u] = tau_bond(p, J)
        return t

    def with_couplings(self, couplings, name=None):
        return GraphSpec(self.n_sites, self.bonds, tuple(float(J) for J in couplings),
                         self.origin, self.coords, name or self.name)

    def to_json(self):
        return {"name": self.name, "sites": self.n_sites,
                "bonds": [[u, v, J] for (u, v), J in zip(self.bonds, self.couplings)],
                "origin": self.origin}


def tau_bond(p, J):
    """tanh(pJ), the single-bond correlation."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    return math.tanh(p * J)


def _box_points(d, side):
    return list(itertools.product(range(side), repeat=d))


def build_graph(kind, d=1, side=2, L=1, bonds=None, couplings=None, n_sites=None,
                origin=0, exact=False, budget=None, name=None):
    """Build a box graph (free boundary) or a custom graph.

    kind is "nn" (nearest-neighbour, J=1), "spread-out" (uniform couplings
    over 0 < |x-y|_inf <= L, normalised to sum to one) or "custom" (bonds
    and couplings supplied by the caller). With ``exact=True`` the graph is
    rejected when a ternary sweep over its bonds would exceed the budget.
    """
    if kind == "custom":
        if bonds is None:
            raise ValueError("custom graph needs a bond list")
        bonds = tuple((int(u), int(v)) for u, v in bonds)
        if couplings is None:
            couplings = [1.0] * len(bonds)
        if n_sites is None:
            n_sites = 1 + max((max(b) for b in bonds), default=0)
        g = GraphSpec(int(n_sites), bonds, tuple(float(J) for J in couplings), origin,
                      name=name or "custom")
    else:
        if d < 1 or side < 1:
            raise ValueError("need d >= 1 and side >= 1")
        pts = _box_points(d, side)
        index = {x: i for i, x in enumerate(pts)}
        blist, jlist = [], []
        if kind == "nn":
            for x in pts:
                for axis in range(d):
                    y = list(x)
                    y[axis] += 1
                    y = tuple(y)
                    if y in index:
                        blist.append((index[x], index[y]))
                        jlist.append(1.0)
        elif kind == "spread-out":
            if not 1 <= L < side:
                raise ValueError("spread-out range needs 1 <= L < side")
            weight = 1.0 / ((2 * L + 1) ** d - 1)
            for x, y in itertools.combinations(pts, 2):
                if max(abs(a - b) for a, b in zip(x, y)) <= L:
                    blist.append((index[x], index[y]))
                    jlist.append(weight)
        else:
            raise ValueError(f"unknown coupling kind {kind!r}")
        g = GraphSpec(len(pts), tuple(blist), tuple(jlist), origin, tuple(pts),
                      name=name or f"{kind}-d{d}-side{side}")
    if exact:
        check_single_budget(g.n_bonds, budget)
    return g


def lattice_stencil(kind="nn", d=1, L=1):
    """Star graph of the one-step couplings from the origin of Z^d.

    The origin sits at the centre of a (2L+1)^d box so that every site x
    with J_{o,x} != 0 is present.
    """
    side = 2 * L + 1
    g = build_graph(kind, d=d, side=side, L=L if kind == "spread-out" else 1)
    centre = tuple([L] * d)
    o = g.coords.index(centre)
    keep = [(b, J) for b, J in zip(g.bonds, g.couplings) if o in b]
    coords = tuple(tuple(c - L for c in x) for x in g.coords)
    return GraphSpec(g.n_sites, tuple(b for b, _ in keep), tuple(J for _, J in keep), o,
                     coords, name=f"{kind}-stencil-d{d}")


@dataclass(frozen=True)
class StepDistribution:
    tau_total: float
    D: dict
    sigma2: Optional[float]
    defined: bool


def step_distribution(graph, p):
    """tau = sum_x tanh(p J_{o,x}), D(x) = tanh(p J_{o,x}) / tau and sigma^2.

    D is keyed by displacement from the origin when coordinates exist and by
    site index otherwise. For tau = 0 the result has ``defined=False``.
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    o = graph.origin
    taus = {}
    for (u, v), J in zip(graph.bonds, graph.couplings):
        if o in (u, v):
            x = v if u == o else u
            taus[x] = taus.get(x, 0.0) + tau_bond(p, J)
    total = math.fsum(taus.values())
    if total == 0.0:
        return StepDistribution(0.0, {}, None, False)
    D = {}
    sq = []
    for x, t in sorted(taus.items()):
        if graph.coords is not None:
            disp = tuple(a - b for a, b in zip(graph.coords[x], graph.coords[o]))
            D[disp] = t / total
            sq.append(sum(c * c for c in disp) * t / total)
        else:
            D[x] = t / total
    sigma2 = math.fsum(sq) if graph.coords is not None else None
    return StepDistribution(total, D, sigma2, True)


def random_mixed_couplings(graph, rng, scale=1.0):
    """Copy of ``graph`` with couplings drawn uniformly from [-scale, scale].

    Redraws until both signs occur; a single bond gets a negative coupling.
    """
    if graph.n_bonds == 1:
        J = -float(rng.uniform(0.0, scale)) or -scale
        return graph.with_couplings((J,), name=graph.name + "-mixed")
    while True:
        J = rng.uniform(-scale, scale, size=graph.n_bonds)
        if (J > 0).any() and (J < 0).any():
            return graph.with_couplings(tuple(float(j) for j in J), name=graph.name + "-mixed")


def _custom(name, n, bonds, origin=0):
    return GraphSpec(n, tuple(bonds), tuple([1.0] * len(bonds)), origin, name=name)


def _box(name, d, side_x, side_y):
    pts = [(i, j) for i in range(side_x) for j in range(side_y)]
    index = {x: k for k, x in enumerate(pts)}
    bonds = []
    for (i, j) in pts:
        for y in ((i + 1, j), (i, j + 1)):
            if y in index:
                bonds.append((index[(i, j)], index[y]))
    return GraphSpec(len(pts), tuple(bonds), tuple([1.0] * len(bonds)), 0, tuple(pts), name=name)


CATALOG = {
    "single-bond": _custom("single-bond", 2, [(0, 1)]),
    "path-3": _custom("path-3", 3, [(0, 1), (1, 2)]),
    "triangle": _custom("triangle", 3, [(0, 1), (1, 2), (0, 2)]),
    "square": _custom("square", 4, [(0, 1), (1, 2), (2, 3), (0, 3)]),
    "square-diag": _custom("square-diag", 4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]),
    "K4": _custom("K4", 4, list(itertools.combinations(range(4), 2))),
    "box-2x2": _box("box-2x2", 2, 2, 2),
    "box-2x3": _box("box-2x3", 2, 2, 3),
}


def list_catalog():
    """Name, size and enumeration cost of every built-in graph."""
    return [{"name": g.name, "sites": g.n_sites, "bonds": g.n_bonds,
             "single_states": 3 ** g.n_bonds, "pair_states": 9 ** g.n_bonds}
            for g in CATALOG.values()]


def graph_from_json(obj):
    try:
        bonds = [(int(u), int(v)) for u, v, _ in obj["bonds"]]
        J = [float(j) for _, _, j in obj["bonds"]]
        sites = obj["sites"]
        n = len(sites) if isinstance(sites, list) else int(sites)
        return GraphSpec(n, tuple(bonds), tuple(J), int(obj.get("origin", 0)),
                         name=str(obj.get("name", "custom")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed graph entry: {exc}") from exc


def load_catalog_file(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    return {g.name: g for g in (graph_from_json(o) for o in data)}


def resolve_graph(ref):
    """Catalog name, or path to a catalog JSON file (optionally path:name)."""
    if ref in CATALOG:
        return CATALOG[ref]
    path, _, which = ref.partition(":") if ":" in ref and not os.path.exists(ref) else (ref, "", "")
    if os.path.exists(path):
        graphs = load_catalog_file(path)
        if which:
            if which not in graphs:
                raise KeyError(f"graph {which!r} not found in {path}")
            return graphs[which]
        if len(graphs) != 1:
            raise KeyError(f"{path} holds {len(graphs)} graphs; use {path}:<name>")
        return next(iter(graphs.values()))
    raise KeyError(f"unknown graph reference {ref!r}")
