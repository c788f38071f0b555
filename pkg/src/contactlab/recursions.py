"""Recursive upper bounds for excursion times and leaf-infection counts.

For a rooted graph ``T`` with a permanently infected parent attached to the
root, ``S(T)`` bounds the expected excursion time of the root-added starred
process and ``M_l(T)`` the expected number of strong infections reaching
level-``l`` leaves during one excursion.

Tree vertex with ``D`` children (``a = lam (D + 1)``)::

    S = 1/(1+a) - 1/a + w^{-1} prod_i (1 + lam w_i S_i),   w = a / (1 + a)
    w M_l = lam sum_i w_i M_{l-1,i} prod_{j != i} (1 + lam w_j S_j)

Cycles are handled by peeling. A cycle ``v1 v2 .. vm`` hanging from its top
vertex ``v1`` (the vertex closest to the root) contributes, through the
quantities ``Y = w S`` and ``YM = w M_l`` of the segment ``v2 .. vm``
attached at both ends to an always-infected ``v1``::

    Y(seg)  = 2 [c(D2) + c(Dm) + (1 + lam Y(seg - v2)) P2 - 1
                                + (1 + lam Y(seg - vm)) Pm - 1]
    YM(seg) = 2 lam [Sigma2 + Sigma_m]

with ``c(D) = (2x + x^2)/(1 + x)^2``, ``x = lam (D + 2)`` and ``P_j`` the
product of the tree factors at ``v_j``. The top vertex itself, with ``D``
tree children, uses ``a = lam (D + 3)`` and an extra factor
``1 + lam Y(v2 .. vm)``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .distributions import DegreeDistribution, TailProfile
from .graph_gen import RootedGraph, ShapeError, gen_gw_tree


@dataclass
class RecursionResult:
    """Bound values per vertex (tree vertices and cycle tops).

    ``S`` and ``w`` are keyed by vertex id; ``M`` is present when a level was
    requested. ``ring_Y`` holds ``w S`` of the peeled cycle below each top.
    """

    lam: float
    l: int | None
    root: int
    S: dict
    w: dict
    M: dict | None = None
    ring_Y: dict = field(default_factory=dict)
    ring_YM: dict = field(default_factory=dict)

    @property
    def root_S(self) -> float:
        return self.S[self.root]

    @property
    def root_M(self) -> float:
        if self.M is None:
            raise ValueError("no level was requested")
        return self.M[self.root]

    @property
    def root_w(self) -> float:
        return self.w[self.root]

    def to_json(self) -> dict:
        out = {"lambda": self.lam, "l": self.l, "root": self.root,
               "S": {str(k): v for k, v in self.S.items()},
               "w": {str(k): v for k, v in self.w.items()}}
        if self.M is not None:
            out["M"] = {str(k): v for k, v in self.M.items()}
        return out


def weight(lam: float, k: int) -> float:
    """Probability that an infection reaching a vertex with ``k`` edges is strong."""
    return lam * k / (1 + lam * k)


def _prod_minus_one(terms: Iterable[float]) -> float:
    """prod(1 + x_i) - 1 without cancellation (compensated log-sum)."""
    return math.expm1(math.fsum(math.log1p(x) for x in terms))


def _s_value(lam: float, k: int, q_minus_one: float) -> float:
    """1/(1+a) - 1/a + (1+a)/a * Q with a = lam k, written as 1/(1+a) + 1 + (Q-1)(1+a)/a."""
    a = lam * k
    return 1.0 / (1.0 + a) + 1.0 + q_minus_one * (1.0 + a) / a


def _c(lam: float, d: int) -> float:
    x = lam * (d + 2)
    return (2 * x + x * x) / (1 + x) ** 2


class _Structure:
    """Tree children and hanging cycles of a rooted graph, seen from the root."""

    def __init__(self, rg: RootedGraph):
        g = rg.graph
        cyc_of = {}
        for ci, c in enumerate(rg.cycles):
            for pos, v in enumerate(c):
                if v in cyc_of:
                    raise ShapeError("cycles share a vertex")
                cyc_of[v] = (ci, pos)
        self.kids: dict[int, list[int]] = {}
        self.ring: dict[int, list[int]] = {}
        self.order: list[int] = []
        entered = set()
        seen = {rg.root}
        stack = [(rg.root, None)]
        while stack:
            x, parent = stack.pop()
            self.order.append(x)
            nb = Counter(g.neighbors(x).tolist())
            if parent is not None:
                nb[parent] -= 1
            if x in cyc_of:
                ci, pos = cyc_of[x]
                c = rg.cycles[ci]
                m = len(c)
                nb[c[pos - 1]] -= 1
                nb[c[(pos + 1) % m]] -= 1
                if ci not in entered:
                    entered.add(ci)
                    ring = [c[(pos + j) % m] for j in range(1, m)]
                    self.ring[x] = ring
                    for y in reversed(ring):
                        if y in seen:
                            raise ShapeError("cycle reached twice")
                        seen.add(y)
                        stack.append((y, None))
            if any(cnt < 0 for cnt in nb.values()):
                raise ShapeError(f"vertex {x} does not match the cycle metadata")
            if nb.get(x, 0):
                raise ShapeError("self-loop outside the cycle metadata")
            kids = [y for y, cnt in nb.items() for _ in range(cnt)]
            for y in kids:
                if y in seen:
                    raise ShapeError("graph has a cycle missing from its metadata")
                seen.add(y)
                stack.append((y, x))
            self.kids[x] = kids
        if len(seen) != g.n:
            raise ShapeError("graph is not connected")
        self.interior = {y for r in self.ring.values() for y in r}


def evaluate(rg: RootedGraph, lam: float, l: int | None = None) -> RecursionResult:
    """Evaluate the S (and, if ``l`` is given, M_l) recursions bottom-up."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    st = _Structure(rg)
    level = {}
    if l is not None:
        stack = [(rg.root, l)]
        while stack:
            x, lv = stack.pop()
            level[x] = lv
            for y in st.kids[x]:
                stack.append((y, lv - 1))
            for y in st.ring.get(x, ()):
                stack.append((y, lv))
    S, W, M, P, F, Q = {}, {}, {}, {}, {}, {}
    ring_Y, ring_YM = {}, {}
    for x in reversed(st.order):
        kids = st.kids[x]
        terms = [lam * W[y] * S[y] for y in kids]
        F[x] = terms
        pm1 = _prod_minus_one(terms)
        P[x] = 1.0 + pm1
        if l is not None:
            # sum_i w_i M_i prod_{j != i}(1 + lam w_j S_j)
            Q[x] = P[x] * math.fsum(W[y] * M[y] / (1 + tm) for y, tm in zip(kids, terms))
        if x in st.interior:
            continue
        D = len(kids)
        if x in st.ring:
            seg = st.ring[x]
            Y, YM = _ring_values(seg, st, P, Q, lam, l is not None)
            ring_Y[x], ring_YM[x] = Y, YM
            if x == rg.root and rg.shape == "gwc2":
                if D:
                    raise ShapeError("gwc2 root must not carry a tree")
                wsum = weight(lam, len(st.kids[seg[0]]) + 2) + weight(lam, len(st.kids[seg[-1]]) + 2)
                W[x] = wsum
                S[x] = Y / wsum
                if l is not None:
                    M[x] = YM / wsum
                continue
            k = D + 3
            W[x] = weight(lam, k)
            qm1 = (1 + lam * Y) * P[x] - 1.0
            S[x] = _s_value(lam, k, qm1)
            if l is not None:
                lv = level[x]
                if lv < 1:
                    raise ValueError("cycle tops need a leaf level of at least 1")
                M[x] = (YM * P[x] + (1 + lam * Y) * Q[x]) / W[x]
            continue
        k = D + 1
        W[x] = weight(lam, k)
        S[x] = _s_value(lam, k, pm1)
        if l is not None:
            lv = level[x]
            if lv == 0:
                M[x] = 1.0
            elif lv < 0 or not kids:
                M[x] = 0.0
            else:
                M[x] = lam * Q[x] / W[x]
    if rg.shape == "gwc2" and rg.root not in st.ring:
        # bare v1: nothing can ever be infected besides the root
        S[rg.root], W[rg.root] = 0.0, 0.0
        if l is not None:
            M[rg.root] = 0.0
    return RecursionResult(lam, l, rg.root, S, W, M if l is not None else None, ring_Y, ring_YM)


def _ring_values(seg, st, P, Q, lam, with_m):
    """Y and YM of the cycle segment ``seg`` hanging from an infected top."""
    k = len(seg)
    cache_y, cache_m = {}, {}
    c = [_c(lam, len(st.kids[z])) for z in seg]
    p = [P[z] for z in seg]
    q = [Q[z] for z in seg] if with_m else None
    # segments by increasing length, so sub-segments are ready
    for length in range(1, k + 1):
        for a in range(0, k - length + 1):
            b = a + length - 1
            ya = cache_y.get((a + 1, b), 0.0)
            yb = cache_y.get((a, b - 1), 0.0)
            y = 2 * (c[a] + c[b] + (1 + lam * ya) * p[a] - 1 + (1 + lam * yb) * p[b] - 1)
            cache_y[(a, b)] = y
            if with_m:
                ma = cache_m.get((a + 1, b), 0.0)
                mb = cache_m.get((a, b - 1), 0.0)
                sig_a = (1 + lam * ya) * q[a] + ma * p[a]
                sig_b = (1 + lam * yb) * q[b] + mb * p[b]
                cache_m[(a, b)] = 2 * lam * (sig_a + sig_b)
    if k == 0:
        return 0.0, 0.0
    return cache_y[(0, k - 1)], cache_m.get((0, k - 1), 0.0)


def _require(rg: RootedGraph, shapes) -> None:
    if rg.shape not in shapes:
        raise ShapeError(f"expected shape in {shapes}, got {rg.shape!r}")


def s_bound_tree(t: RootedGraph, lam: float) -> RecursionResult:
    """Excursion-time bound on a tree; a single vertex gives ``1 + 1/(1+lam)``."""
    _require(t, ("tree",))
    return evaluate(t, lam)


def m_bound_tree(t: RootedGraph, lam: float, l: int) -> RecursionResult:
    """Leaf-infection bound on a tree for leaves at depth ``l`` (``M_0 = 1``)."""
    _require(t, ("tree",))
    if l < 0:
        raise ValueError("l must be nonnegative")
    return evaluate(t, lam, l)


def _cyclic_ok(h: RootedGraph) -> None:
    if h.shape == "tree" and h.params.get("m") == 1:
        return  # GWC1 with m = 1 is a plain tree
    _require(h, ("gwc1", "gwc2", "egw", "ball"))


def s_bound_cyclic(h: RootedGraph, lam: float) -> RecursionResult:
    """Excursion-time bound on GWC1, GWC2, EGW graphs (and unicyclic balls)."""
    _cyclic_ok(h)
    return evaluate(h, lam)


def m_bound_cyclic(h: RootedGraph, lam: float, l: int) -> RecursionResult:
    """Leaf-infection bound on cyclic shapes; leaves sit ``l`` below their cycle vertex."""
    _cyclic_ok(h)
    return evaluate(h, lam, l)


# --------------------------------------------------------------------------
# tail diagnostics
# --------------------------------------------------------------------------

@dataclass
class TailTable:
    grid: np.ndarray
    counts: np.ndarray
    reps: int
    envelope: np.ndarray

    @property
    def freq(self) -> np.ndarray:
        return self.counts / self.reps

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.envelope > 0, self.freq / self.envelope, np.inf)

    @property
    def resolvable(self) -> np.ndarray:
        return self.envelope >= 10.0 / self.reps

    def rows(self) -> list[dict]:
        return [{"t": float(t), "count": int(c), "freq": float(f), "f": float(e),
                 "ratio": float(r), "resolvable": bool(ok)}
                for t, c, f, e, r, ok in zip(self.grid, self.counts, self.freq, self.envelope,
                                             self.ratio, self.resolvable)]


def default_grid(profile: TailProfile, top: float = 1e3, points: int = 40) -> np.ndarray:
    lo = profile.t_min
    return np.geomspace(lo, max(top, 10 * lo), points)


def tail_profile_check(sampler, profile: TailProfile, reps: int, grid=None,
                       strong: bool = False) -> TailTable:
    """Empirical exceedance frequencies of sampled bound values against ``f``.

    ``sampler`` yields values or ``(graph, value)`` pairs; ``reps`` of them
    are consumed. With ``strong=True`` the envelope is ``f(3t)/3``.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    vals = np.empty(reps)
    it = iter(sampler)
    for i in range(reps):
        item = next(it)
        vals[i] = item[1] if isinstance(item, tuple) else item
    grid = default_grid(profile) if grid is None else np.asarray(grid, dtype=float)
    vals.sort()
    counts = reps - np.searchsorted(vals, grid, side="left")
    env = profile.f(3 * grid) / 3 if strong else profile.f(grid)
    return TailTable(grid, counts, reps, np.asarray(env, dtype=float))


def gw_bound_sampler(xi_root: DegreeDistribution, xi: DegreeDistribution, depth: int,
                     lam: float, rng: np.random.Generator, kind: str = "S"):
    """Yield ``(tree, w S)`` or ``(tree, 1.5^depth w M_depth)`` for GW trees."""
    while True:
        t = gen_gw_tree(xi_root, xi, depth, rng)
        if kind == "S":
            r = s_bound_tree(t, lam)
            yield t, r.root_w * r.root_S
        else:
            r = m_bound_tree(t, lam, depth)
            yield t, 1.5**depth * r.root_w * r.root_M


def envelope_inverse(profile: TailProfile, u: np.ndarray) -> np.ndarray:
    """Smallest t >= A lam with f(t) <= u, for u <= f(A lam) (bisection in log t)."""
    u = np.asarray(u, dtype=float)
    lo = np.full(u.shape, math.log(profile.t_min))
    hi = np.full(u.shape, math.log(profile.t_min) + 1.0)
    while True:
        bad = profile.f(np.exp(hi)) > u
        if not bad.any():
            break
        hi = np.where(bad, hi + (hi - lo) * 2, hi)
    for _ in range(80):
        mid = (lo + hi) / 2
        above = profile.f(np.exp(mid)) > u
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return np.exp(hi)


def product_envelope_sampler(mu: DegreeDistribution, profile: TailProfile,
                             rng: np.random.Generator, batch: int = 4096):
    """Yield ``prod_{i <= D}(1 + lam X_i) - 1`` with ``D ~ mu`` and ``X_i`` on the envelope.

    Each ``X_i`` satisfies ``P(X_i >= t) = f(t)`` for ``t >= A lam`` and sits
    just below ``A lam`` otherwise, the largest law with a good tail.
    """
    lam = profile.lam
    f0 = profile.f(profile.t_min)
    while True:
        d = mu.sample(rng, batch)
        total = int(d.sum())
        u = rng.random(total)
        x = np.full(total, profile.t_min * (1 - 1e-9))
        hit = u < f0
        if hit.any():
            x[hit] = envelope_inverse(profile, u[hit])
        owner = np.repeat(np.arange(batch), d)
        logs = np.bincount(owner, weights=np.log1p(lam * x), minlength=batch)
        for v in np.expm1(logs):
            yield float(v)
