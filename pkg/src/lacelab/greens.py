"""Random-walk Green's functions on tori and the convolution-bound checks.

Fields live on the torus (Z/M)^d as numpy arrays of shape (M,)*d indexed
by coordinates mod M. Distances use the minimal-image Euclidean norm and
<x> = max(|x|, 1). Cyclic convolutions go through real FFTs.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft, integrate, special
from scipy.stats import qmc

from . import spin_oracle


@dataclass
class LatticeField:
    values: np.ndarray

    @property
    def d(self):
        return self.values.ndim

    @property
    def M(self):
        return self.values.shape[0]

    def __getitem__(self, x):
        return self.values[tuple(int(c) % self.M for c in x)]

    def conv(self, other):
        return LatticeField(cyclic_conv(self.values, other.values))

    def total(self):
        return float(math.fsum(self.values.ravel()))


def min_image(M, d):
    """Per-axis signed minimal-image coordinates as an open mesh."""
    c = np.arange(M)
    c = np.where(c > M // 2, c - M, c)
    return np.meshgrid(*([c] * d), indexing="ij", sparse=True)


def torus_norm(M, d):
    return np.sqrt(sum(c.astype(float) ** 2 for c in min_image(M, d)))


def bracket(M, d):
    """<x> = |x| v 1 on the torus."""
    return np.maximum(torus_norm(M, d), 1.0)


def delta(M, d):
    out = np.zeros((M,) * d)
    out[(0,) * d] = 1.0
    return out


def cyclic_conv(f, g):
    s = f.shape
    return fft.irfftn(fft.rfftn(f) * fft.rfftn(g), s=s, axes=range(len(s)))


def torus_step(d, M, kind="nn", L=1):
    """Step distribution D on the torus: nearest-neighbour or uniform spread-out."""
    D = np.zeros((M,) * d)
    if kind == "nn":
        if M < 3:
            raise ValueError("nearest-neighbour torus needs M >= 3")
        for axis in range(d):
            for s in (1, -1):
                x = [0] * d
                x[axis] = s % M
                D[tuple(x)] += 1.0 / (2 * d)
    elif kind == "spread-out":
        if not (1 <= L and 2 * L + 1 <= M):
            raise ValueError("spread-out torus needs 1 <= L and 2L+1 <= M")
        mesh = min_image(M, d)
        sup = np.zeros((M,) * d, dtype=int)
        for c in mesh:
            sup = np.maximum(sup, np.abs(c))
        mask = (sup >= 1) & (sup <= L)
        D[mask] = 1.0 / np.count_nonzero(mask)
    else:
        raise ValueError(f"unknown step kind {kind!r}")
    return D


def sigma2(D):
    M, d = D.shape[0], D.ndim
    return float(np.sum(torus_norm(M, d) ** 2 * D))


def green_function(D, r, tol=1e-12, max_iter=1_000_000, method=None):
    """S_r = sum_i r^i D^{*i} on the torus.

    For r < 1 the default method iterates S <- delta + r D*S until the
    largest update is below ``tol``; ``method="fourier"`` solves
    S^ = 1/(1 - r D^) directly. For r = 1 (d >= 3 only) the zero Fourier
    mode is dropped, which fixes the torus solution up to its constant.
    """
    D = np.asarray(D, dtype=float)
    d, M = D.ndim, D.shape[0]
    if not 0 <= r <= 1:
        raise ValueError("r must lie in [0, 1]")
    if r == 1:
        if d <= 2:
            raise ValueError(f"S_1 diverges in d={d}")
        Dh = fft.rfftn(D)
        denom = 1.0 - Dh
        denom[(0,) * d] = np.inf
        return fft.irfftn(1.0 / denom, s=D.shape, axes=range(d))
    if r * math.fsum(D.ravel()) >= 1:
        raise ValueError("need r * sum(D) < 1")
    if method == "fourier":
        return fft.irfftn(1.0 / (1.0 - r * fft.rfftn(D)), s=D.shape, axes=range(d))
    dl = delta(M, d)
    Dh = fft.rfftn(D)
    S = dl.copy()
    for _ in range(max_iter):
        new = dl + r * fft.irfftn(Dh * fft.rfftn(S), s=D.shape, axes=range(d))
        step = float(np.max(np.abs(new - S)))
        S = new
        if step < tol:
            return S
    raise ArithmeticError(f"fixed-point iteration did not converge in {max_iter} steps")


def fixed_point_residual(S, D, r):
    d = D.ndim
    return float(np.max(np.abs(S - delta(D.shape[0], d) - r * cyclic_conv(D, S))))


def nn_green_integral(x, d, r=1.0, M=None):
    """Nearest-neighbour S_r(x) from the heat-kernel integral, no FFT.

    S_r(x) = int_0^inf e^{-(1-r)t} prod_i e^{-rt/d} I_{x_i}(rt/d) dt on Z^d.
    On a torus of side M each Bessel factor is periodised; at r = 1 the
    constant zero-mode term M^{-d} is subtracted from the integrand.
    """
    x = [int(c) for c in x]

    def factor(xi, s):
        if M is None:
            return special.ive(abs(xi), s)
        # Poisson-summed 1D torus kernel, images out to where they vanish
        tot, m = 0.0, 0
        while True:
            terms = [special.ive(abs(xi + m * M), s)]
            if m:
                terms.append(special.ive(abs(xi - m * M), s))
            tot += sum(terms)
            if max(terms) < 1e-18 * max(tot, 1e-300) and m > 0:
                return tot
            m += 1

    zero = 0.0 if (M is None or r < 1) else float(M) ** (-d)

    def integrand(t):
        s = r * t / d
        val = math.exp(-(1.0 - r) * t) if r < 1 else 1.0
        for xi in x:
            val *= factor(xi, s)
        return val - zero

    if M is None or r < 1:
        val, _ = integrate.quad(integrand, 0.0, np.inf, limit=500, epsabs=1e-13, epsrel=1e-11)
        return val
    # at r = 1 on the torus the integrand decays like exp(-gap t) with gap
    # the smallest nonzero eigenvalue of 1 - D^. Integrate piecewise up to
    # exp(-30), before the zero-mode subtraction turns into roundoff.
    gap = (1.0 - math.cos(2 * math.pi / M)) / d
    upper = 30.0 / gap
    edges = [0.0] + list(np.geomspace(1.0, upper, 24))
    return math.fsum(integrate.quad(integrand, a, b, limit=200, epsabs=1e-15, epsrel=1e-12)[0]
                     for a, b in zip(edges[:-1], edges[1:]))


def nn_green_1d(x, r, M=None):
    """d=1 nearest-neighbour S_r(x) in closed form (periodised on a torus)."""
    s = math.sqrt(1.0 - r * r)
    base = (1.0 - s) / r if r else 0.0

    def line(k):
        if r == 0:
            return 1.0 if k == 0 else 0.0
        return base ** abs(k) / s

    if M is None:
        return line(x)
    # sum over images x + mM, geometric on each side
    x %= M
    if r == 0:
        return 1.0 if x == 0 else 0.0
    q = base ** M
    return (base ** x + base ** (M - x)) / (s * (1.0 - q)) if x else (1.0 + q) / (s * (1.0 - q))


def a_d(d):
    if d <= 2:
        raise ValueError("a_d needs d > 2")
    return (d / 2) * math.pi ** (-d / 2) * math.gamma(d / 2 - 1)


def check_green_asymptotics(d=5, M=33, r=1.0, window=(5.0, 8.0), kind="nn", L=1,
                            details=False):
    """sup over window of |S_1(x) sigma^2 |x|^(d-2) / a_d - 1| on the torus."""
    if r != 1:
        raise ValueError("the asymptotic form is stated for r = 1 only")
    lo, hi = window
    if hi > M / 4:
        raise ValueError(f"window upper end {hi} exceeds M/4 = {M / 4}")
    D = torus_step(d, M, kind, L)
    S = green_function(D, 1.0)
    s2 = sigma2(D)
    norm = torus_norm(M, d)
    sel = (norm >= lo) & (norm <= hi)
    ratio = S[sel] * s2 * norm[sel] ** (d - 2) / a_d(d)
    dev = float(np.max(np.abs(ratio - 1.0)))
    if details:
        return dev, {"points": int(np.count_nonzero(sel)), "sigma2": s2,
                     "ratio_min": float(ratio.min()), "ratio_max": float(ratio.max())}
    return dev


def green_profile(d, M, r, kind="nn", L=1, axis_points=None):
    """Rows (x, S_r(x), predicted, ratio) along the first axis.

    predicted is a_d / (sigma^2 |x|^(d-2)) for r = 1 and d > 2, else NaN.
    """
    D = torus_step(d, M, kind, L)
    S = green_function(D, r)
    s2 = sigma2(D)
    rows = []
    for k in range(M // 2 + 1 if axis_points is None else axis_points):
        x = (k,) + (0,) * (d - 1)
        val = float(S[x])
        if r == 1 and d > 2 and k > 0:
            pred = a_d(d) / (s2 * k ** (d - 2))
            rows.append((k, val, pred, val / pred))
        else:
            rows.append((k, val, float("nan"), float("nan")))
    return rows


def _check_growth(sups):
    vals = list(sups.values())
    return vals[-1] / vals[0]


def convolution_bound_check(d, a, b, sizes):
    """{M: sup_z (<.>^-a * <.>^-b)(z) <z>^((a^d)+b-d)} over torus sides M.

    Translation invariance on the torus reduces the (v, x) sweep to the
    single offset z = x - v, and the convolution is evaluated for every z
    at once, so each size is a full sweep.
    """
    if not (a >= b > 0 and a + b > d):
        raise ValueError("need a >= b > 0 and a + b > d")
    expo = (min(a, d) + b) - d
    out = {}
    for M in sizes:
        br = bracket(M, d)
        lhs = cyclic_conv(br ** -a, br ** -b)
        out[M] = float(np.max(lhs * br ** expo))
    return out


def conv_growth(d, a, b, sizes):
    sups = convolution_bound_check(d, a, b, sizes)
    return sups, _check_growth(sups)


FULL_SWEEP_PAIRS = 10 ** 6
STAR_SAMPLES = 512


def _star_configs(M, d, seed, n_samples):
    """(x', y) pairs with x = 0: a small cube, the axes, and Sobol points."""
    half = M // 2
    pts = set()
    cube = [tuple(int(v) - 1 for v in c) for c in np.ndindex(*([3] * d))]
    for xp in cube:
        for y in cube:
            pts.add((xp, y))
    axis = [tuple(s * k if i == ax else 0 for i in range(d))
            for ax in range(d) for k in (1, 2, half // 2, half) for s in (1, -1)]
    axis.append((0,) * d)
    for xp in axis:
        for y in axis:
            pts.add((xp, y))
    if M ** (2 * d) <= FULL_SWEEP_PAIRS:
        grid = [tuple(int(v) for v in c) for c in np.ndindex(*([M] * d))]
        return sorted({(xp, y) for xp in grid for y in grid} | pts)
    sob = qmc.Sobol(2 * d, scramble=True, seed=seed).random(n_samples)
    for row in np.floor(sob * M).astype(int):
        pts.add((tuple(int(v) for v in row[:d]), tuple(int(v) for v in row[d:])))
    return sorted(pts)


def star_bound_check(d, q, sizes, seed=0, n_samples=STAR_SAMPLES):
    """{M: sup of star LHS * <x-y>^q <x'-y'>^q} over sampled configurations.

    x is fixed at the origin by translation invariance. For each sampled
    (x', y) every y' is covered at once through one cyclic convolution.
    """
    if not d / 2 < q < d:
        raise ValueError("need d/2 < q < d")
    out = {}
    for M in sizes:
        br = bracket(M, d)
        k = br ** -q
        kh = fft.rfftn(k)
        best = 0.0
        for xp, y in _star_configs(M, d, seed, n_samples):
            # h(z) = <z>^-q <x'-z>^-q <z-y>^-q
            h = k * np.roll(k, xp, axis=range(d)) * np.roll(k, y, axis=range(d))
            lhs = fft.irfftn(fft.rfftn(h) * kh, s=h.shape, axes=range(d))
            w = br[tuple(-c % M for c in y)] ** q * np.roll(br, xp, axis=range(d)) ** q
            best = max(best, float(np.max(lhs * w)))
        out[M] = best
    return out


def star_growth(d, q, sizes, seed=0, n_samples=STAR_SAMPLES):
    sups = star_bound_check(d, q, sizes, seed, n_samples)
    return sups, _check_growth(sups)


def bar_norms(G, s, t):
    """(max_x |x|^s G(x), max_x sum_y |y|^t G(y) G(x-y)) with cyclic sums."""
    G = np.asarray(G, dtype=float)
    norm = torus_norm(G.shape[0], G.ndim)
    gbar = float(np.max(norm ** s * G))
    wbar = float(np.max(cyclic_conv(norm ** t * G, G)))
    return gbar, wbar


def _stencil(graph):
    """Displacement -> coupling for a translation-invariant embedded graph."""
    if graph.coords is None:
        raise ValueError("graph has no lattice coordinates")
    st = {}
    for (u, v), J in zip(graph.bonds, graph.couplings):
        dx = tuple(int(b) - int(a) for a, b in zip(graph.coords[u], graph.coords[v]))
        for disp in (dx, tuple(-c for c in dx)):
            if disp in st and not math.isclose(st[disp], J, rel_tol=1e-12):
                raise ValueError("couplings are not translation invariant")
            st[disp] = J
    return st


def random_walk_domination_check(graph, p, M=None):
    """S_tau(x - o) - <phi_o phi_x> for every site x.

    tau D is the bulk stencil tanh(p J_{o,x}); S_tau is computed on a torus
    of side M (default 4 * extent + 8). Periodic images only add positive
    terms, and M is chosen large enough that they are far below 1e-9 for
    tau < 1.
    """
    if not graph.ferromagnetic:
        raise ValueError("the random-walk bound is for ferromagnetic couplings")
    st = _stencil(graph)
    tau = math.fsum(math.tanh(p * J) for J in st.values())
    if tau > 1:
        raise ValueError(f"tau = {tau:.6g} > 1")
    if tau == 1:
        raise ValueError("tau = 1 has no finite-torus walk bound; use tau < 1")
    coords = np.array(graph.coords)
    d = coords.shape[1]
    extent = int(np.max(coords.max(axis=0) - coords.min(axis=0)))
    M = M or 4 * extent + 8
    G = spin_oracle.two_point_matrix(graph, p)
    o = graph.origin
    if tau == 0:
        S = delta(M, d)
    else:
        D = np.zeros((M,) * d)
        for disp, J in st.items():
            D[tuple(c % M for c in disp)] += math.tanh(p * J) / tau
        S = green_function(D, tau, method="fourier")
    margins = np.empty(graph.n_sites)
    for x in range(graph.n_sites):
        disp = tuple(int(c) % M for c in coords[x] - coords[o])
        margins[x] = S[disp] - G[o, x]
    return margins
