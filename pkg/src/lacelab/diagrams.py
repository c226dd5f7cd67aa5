"""Bounding diagrams built from two-point kernels, and the bound checks.

Kernels are dense site x site arrays. Multi-index kernels carry extra
trailing axes for the replacement sites: ``P'[y, x, u]`` and
``P''[y, x, u, v]``.

The j-th ladder diagram is described by a symbolic factor list (pairs of
index labels for its bubble chains and its two-point functions) and
evaluated with ``numpy.einsum``. The primed diagrams are generated from
that list by swapping factors, so no order is written out by hand.
"""
import string

import numpy as np

from . import expansion as ex
from .currents import site_mask


class PsiDivergent(ArithmeticError):
    """The bubble kernel has spectral radius >= 1 so psi is infinite."""


# order cap for the primed ladder series (tolerance 1e-14 per order)
SERIES_CAP = 400


def two_point(graph, p):
    return ex.engine(graph, p).G


def tilde_G(graph, p):
    """G~(y, x) = sum over directed bonds b into x of G(y, tail b) tau_b."""
    eng = ex.engine(graph, p)
    return eng.G @ eng.tau


def bubble_radius(graph, p):
    B = tilde_G(graph, p) ** 2
    return float(np.max(np.abs(np.linalg.eigvals(B))))


def psi(graph, p, tol=1e-9):
    """psi = sum_j B^j with B = G~ squared entrywise, by a linear solve."""
    tg = tilde_G(graph, p)
    B = tg ** 2
    rho = float(np.max(np.abs(np.linalg.eigvals(B))))
    if rho >= 1.0 - tol:
        raise PsiDivergent(f"bubble spectral radius {rho:.6g} >= 1 at p={p}")
    n = B.shape[0]
    return np.linalg.solve(np.eye(n) - B, np.eye(n))


def psi_series(graph, p, terms=200):
    """Truncated geometric series for psi, kept as a cross-check."""
    B = tilde_G(graph, p) ** 2
    out = np.eye(B.shape[0])
    term = np.eye(B.shape[0])
    for _ in range(terms):
        term = term @ B
        out = out + term
    return out


def ladder_factors(j):
    """Factor list of the j-th ladder diagram.

    Returns (bubbles, twopoints, first, last, prefactor), with bubble chain
    i joining (v_i, v'_i) and each two-point factor given as a label pair.
    Labels are "v1".."vj" and "w1".."wj" (w for the primed sites).
    """
    if j < 1:
        raise ValueError("ladder diagrams start at j = 1")
    bubbles = [(f"v{i}", f"w{i}") for i in range(1, j + 1)]
    if j == 1:
        return bubbles, [("v1", "w1")], "v1", "w1", 2.0
    twos = [("v1", "v2"), ("v2", "w1")]
    for i in range(2, j):
        twos += [(f"w{i-1}", f"v{i+1}"), (f"v{i+1}", f"w{i}")]
    twos.append((f"w{j-1}", f"w{j}"))
    return bubbles, twos, "v1", f"w{j}", 1.0


class DiagramKit:
    """All kernels for one (graph, p)."""

    def __init__(self, graph, p, cap=SERIES_CAP):
        self.graph = graph
        self.p = p
        self.cap = cap
        self.G = two_point(graph, p)
        self.tG = tilde_G(graph, p)
        self.tau = ex.engine(graph, p).tau
        self.psi = psi(graph, p)
        n = self.G.shape[0]
        self.n = n
        I = np.eye(n)
        self.Psi = self.psi - I
        G, tG, ps = self.G, self.tG, self.psi
        # G(a,u) G(u,b)
        self.Gu = np.einsum("au,ub->abu", G, G)
        # sum_v' G(a,v') G(v',b) psi(v',v)
        self.H = np.einsum("ak,kb,kv->abv", G, G, ps)
        # K_u(z,z') = G(z,u) G~(u,z') + G~(z,z') delta(u,z')
        K = np.einsum("zu,uw->zwu", G, tG) + np.einsum("zw,uw->zwu", tG, I)
        # psi (G~ * K_u) psi: one bubble edge in a chain replaced
        self.Mu = np.einsum("ca,abu,bd->cdu", ps, tG[:, :, None] * K, ps)
        self.Mv = np.einsum("cdk,kv->cdv", self.Mu, ps)

    def _contract(self, j, swaps):
        """Evaluate the j-th ladder with factors replaced per ``swaps``.

        ``swaps`` maps ("G", k) or ("B", i) to (array, extra labels). Output
        axes are (first, last, extra labels in sorted order).
        """
        bubbles, twos, first, last, pref = ladder_factors(j)
        labels = {}
        letters = iter(string.ascii_letters)

        def lab(name):
            if name not in labels:
                labels[name] = next(letters)
            return labels[name]

        operands, subs = [], []
        extras = set()
        for i, (a, b) in enumerate(bubbles):
            arr, ext = swaps.get(("B", i), (self.Psi, ()))
            operands.append(arr)
            subs.append(lab(a) + lab(b) + "".join(lab(e) for e in ext))
            extras.update(ext)
        for k, (a, b) in enumerate(twos):
            arr, ext = swaps.get(("G", k), (self.G, ()))
            operands.append(arr)
            subs.append(lab(a) + lab(b) + "".join(lab(e) for e in ext))
            extras.update(ext)
        out = lab(first) + lab(last) + "".join(lab(e) for e in sorted(extras))
        expr = ",".join(subs) + "->" + out
        return pref * np.einsum(expr, *operands, optimize="greedy")

    def P(self, j):
        return self._contract(j, {})

    def P_prime(self, j):
        """P'^(j)[y, x, u]."""
        if j == 0:
            G = self.G
            return np.einsum("yx,yu,ux->yxu", G * G, G, G)
        _, twos, _, _, _ = ladder_factors(j)
        return sum(self._contract(j, {("G", k): (self.Gu, ("u",))}) for k in range(len(twos)))

    def P_dprime(self, j):
        """P''^(j)[y, x, u, v]: one two-point and one bubble edge replaced, both patterns."""
        G = self.G
        if j == 0:
            return np.einsum("yx,yu,ux,yk,kx,kv->yxuv", G, G, G, G, G, self.psi)
        bubbles, twos, _, _, _ = ladder_factors(j)
        total = 0.0
        for k in range(len(twos)):
            for i in range(len(bubbles)):
                total = total + self._contract(j, {("G", k): (self.H, ("v",)), ("B", i): (self.Mu, ("u",))})
                total = total + self._contract(j, {("G", k): (self.Gu, ("u",)), ("B", i): (self.Mv, ("v",))})
        return total

    def _ladder_series(self, grep, brep, want, tol=1e-14, cap=200):
        """sum_{j>=1} of ladder diagrams with the marked replacements, by transfer steps.

        Step i of the j-th ladder carries G(w_{i-1}, m) G(m, w_i) psi-1(m, w_{i+1})
        with m = v_{i+1} summed; the ladder opens with psi-1(v_1, w_1) and
        closes with G(w_{j-1}, w_j). ``grep``/``brep`` are (array, extra
        labels) replacing exactly one two-point factor and/or one bubble
        factor. Channels record which replacements have been made; only the
        ``want`` channel is accumulated. Returns (sum, per-order terms, converged).
        All terms are nonnegative for ferromagnets, so an unconverged sum
        is still a lower bound on the full series.
        """
        n = self.n
        I = np.eye(n)
        plain = {"g": (self.G, ""), "b": (self.Psi, "")}
        marks = {"g": grep, "b": brep}

        def choices(kind, chan):
            yield plain[kind], chan
            if marks[kind] is not None and kind not in chan:
                yield marks[kind], chan | {kind}

        def ext(chan):
            return "".join(sorted("".join(marks[k][1] for k in chan)))

        state = {}
        for (arr, e), chan in choices("b", frozenset()):
            state[chan] = np.einsum("Vw" + e + ",Va->Vaw" + e, arr, I)
        total = None
        terms = []
        for j in range(1, cap + 1):
            term = None
            for chan, S in state.items():
                for (arr, e), out in choices("g", chan):
                    if out != want:
                        continue
                    se = ext(chan)
                    val = np.einsum("Vab" + se + ",ab" + e + "->Vb" + ext(out), S, arr)
                    term = val if term is None else term + val
            if term is not None:
                if j == 1:
                    term = 2.0 * term
                terms.append(term)
                total = term if total is None else total + term
                if j > 1 and np.max(np.abs(term)) < tol:
                    return total, terms, True
            new = {}
            for chan, S in state.items():
                se = ext(chan)
                for (g1, e1), c1 in choices("g", chan):
                    for (g2, e2), c2 in choices("g", c1):
                        for (b3, e3), c3 in choices("b", c2):
                            expr = ("Vab" + se + ",am" + e1 + ",mb" + e2 + ",mc" + e3
                                    + "->Vbc" + ext(c3))
                            val = np.einsum(expr, S, g1, g2, b3, optimize="greedy")
                            new[c3] = val if c3 not in new else new[c3] + val
            state = new
        return total, terms, False

    def P_prime_terms(self):
        return self._ladder_series((self.Gu, "u"), None, frozenset("g"))[1]

    def P_dprime_terms(self):
        want = frozenset("gb")
        t1 = self._ladder_series((self.H, "v"), (self.Mu, "u"), want)[1]
        t2 = self._ladder_series((self.Gu, "u"), (self.Mv, "v"), want)[1]
        return [a + b for a, b in zip(t1, t2)]

    def P_prime_sum(self):
        """sum_j P'^(j) over j >= 0 as (value, converged)."""
        if not hasattr(self, "_pp"):
            tail, _, ok = self._ladder_series((self.Gu, "u"), None, frozenset("g"), cap=self.cap)
            self._pp = (self.P_prime(0) + tail, ok)
        return self._pp

    def P_dprime_sum(self):
        if not hasattr(self, "_pdp"):
            want = frozenset("gb")
            t1, _, ok1 = self._ladder_series((self.H, "v"), (self.Mu, "u"), want, cap=self.cap)
            t2, _, ok2 = self._ladder_series((self.Gu, "u"), (self.Mv, "v"), want, cap=self.cap)
            self._pdp = (self.P_dprime(0) + t1 + t2, ok1 and ok2)
        return self._pdp

    @property
    def converged(self):
        return self.P_prime_sum()[1] and self.P_dprime_sum()[1]

    def Q_prime(self):
        """Q'[y, x, u] = sum_z (delta + G~)(y, z) P'[z, x, u]."""
        D = np.eye(self.n) + self.tG
        return np.einsum("yz,zxu->yxu", D, self.P_prime_sum()[0])

    def Q_dprime(self):
        D = np.eye(self.n) + self.tG
        first = np.einsum("yz,zxuv->yxuv", D, self.P_dprime_sum()[0])
        second = np.einsum("yk,kz,zxu,kv->yxuv", D, self.tG, self.P_prime_sum()[0], self.psi)
        return first + second


def P_j(graph, p, j):
    return DiagramKit(graph, p).P(j)


def P_prime(graph, p, j, u):
    return DiagramKit(graph, p).P_prime(j)[:, :, u]


def P_dprime(graph, p, j, u, v):
    return DiagramKit(graph, p).P_dprime(j)[:, :, u, v]


def Q_prime(graph, p, u):
    return DiagramKit(graph, p).Q_prime()[:, :, u]


def Q_dprime(graph, p, u, v):
    return DiagramKit(graph, p).Q_dprime()[:, :, u, v]


def _require_ferro(graph):
    if not graph.ferromagnetic:
        raise ValueError("diagrammatic bounds are stated for ferromagnetic couplings only")


def pi_bound(graph, p, j):
    """Right-hand side of the diagrammatic bound on pi^(j)(x), for every x."""
    _require_ferro(graph)
    o = graph.origin
    if j == 0:
        return two_point(graph, p)[o] ** 3
    kit = DiagramKit(graph, p)
    X = kit.P_prime(0)[o]                      # [b_1 tail, v_1]
    for _ in range(j - 1):
        X = np.einsum("av,ab,bcvw->cw", X, kit.tau, kit.Q_dprime())
    return np.einsum("av,ab,bxv->x", X, kit.tau, kit.Q_prime())


def verify_diagrammatic_bounds(graph, p, j):
    """margin(x) = bound(x) - pi^(j)(x); all entries +inf when psi diverges."""
    _require_ferro(graph)
    pi = ex.engine(graph, p).pi(j)
    try:
        rhs = pi_bound(graph, p, j)
    except PsiDivergent:
        return np.full(graph.n_sites, np.inf)
    return rhs - pi


def verify_aux_bounds(graph, p, A, y, x, v, kit=None):
    """Margins (RHS - LHS) of the four auxiliary inequalities for one (A, y, x, v).

    Keys: "pi0_conn" (o-rooted double connection with o <-> y),
    "theta" (Theta by Theta'), "theta_conn" (Theta[1{y<->v}]),
    "theta_prime" and "theta_dprime" (Theta', Theta'' by sums over u in A).
    """
    _require_ferro(graph)
    A = site_mask(A)
    eng = ex.engine(graph, p)
    o = graph.origin
    n = graph.n_sites
    if kit is None:
        try:
            kit = DiagramKit(graph, p)
        except PsiDivergent:
            kit = None
    I = np.eye(n)
    G = eng.G
    # pi0' bound needs only G
    lhs_a = eng.theta_conn_matrix(o, graph.full_mask)[x, y]
    rhs_a = G[o, x] ** 2 * G[o, y] * G[y, x]
    out = {"pi0_conn": float(rhs_a - lhs_a)}
    tG = G @ eng.tau
    theta_y = eng.theta_vector(y, A)[x]
    tp = np.array([eng.theta_prime_vector(z, A)[x] for z in range(n)])
    out["theta"] = float((I[y] + tG[y]) @ tp - theta_y)
    if kit is None:
        for key in ("theta_conn", "theta_prime", "theta_dprime"):
            out[key] = float("inf")
        return out
    tdp = np.array([eng.theta_dprime_matrix(z, A)[x, v] for z in range(n)])
    lhs_c = eng.theta_conn_matrix(y, A)[x, v]
    rhs_c = (I[y] + tG[y]) @ tdp + np.einsum("k,kz,z,k->", I[y] + tG[y], tG, tp, kit.psi[:, v])
    out["theta_conn"] = float(rhs_c - lhs_c)
    inA = np.array([(A >> u) & 1 for u in range(n)], dtype=float)
    Pp = kit.P_prime_sum()[0]
    Pdp = kit.P_dprime_sum()[0]
    out["theta_prime"] = float(Pp[y, x] @ inA - eng.theta_prime_vector(y, A)[x])
    out["theta_dprime"] = float(Pdp[y, x, :, v] @ inA - eng.theta_dprime_matrix(y, A)[x, v])
    return out


def aux_bound_sweep(graph, p, max_A=None):
    """Smallest margin of each auxiliary inequality over A, y, x, v."""
    _require_ferro(graph)
    try:
        kit = DiagramKit(graph, p)
    except PsiDivergent:
        kit = None
    n = graph.n_sites
    worst = {}
    for A in range(2 ** n):
        if max_A is not None and bin(A).count("1") > max_A:
            continue
        for y in range(n):
            for x in range(n):
                for v in range(n):
                    for k, val in verify_aux_bounds(graph, p, A, y, x, v, kit).items():
                        worst[k] = min(worst.get(k, np.inf), val)
    return worst
