"""Random graph families and local structure.

Graphs are multigraphs: the configuration model produces self-loops and
parallel edges, and both are kept. Adjacency is stored in CSR form; a
self-loop at ``v`` lists ``v`` twice in ``adj(v)``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .distributions import DegreeDistribution

SHAPES = ("tree", "gwc1", "gwc2", "egw", "ball", "graph")


class ShapeError(ValueError):
    pass


class MultiCycleError(ValueError):
    """Raised when a neighbourhood holds more than one independent cycle."""


# --------------------------------------------------------------------------
# core containers
# --------------------------------------------------------------------------

class Graph:
    """Undirected multigraph on vertices ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : array-like of shape (m, 2)
        Edge list; repeated pairs are parallel edges, ``(v, v)`` is a loop.
    """

    def __init__(self, n: int, edges):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n < 0 or (edges.size and (edges.min() < 0 or edges.max() >= n)):
            raise ValueError("edge endpoints must lie in 0..n-1")
        self.n = int(n)
        self.edges = edges
        self.edges.setflags(write=False)
        src = np.concatenate((edges[:, 0], edges[:, 1]))
        dst = np.concatenate((edges[:, 1], edges[:, 0]))
        order = np.argsort(src, kind="stable")
        self.indices = dst[order]
        self.indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=self.indptr[1:])
        self.indices.setflags(write=False)
        self.indptr.setflags(write=False)
        self._out = None

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @property
    def degree_seq(self) -> np.ndarray:
        return np.diff(self.indptr)

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def out_lists(self) -> list[list[int]]:
        """Per-vertex infection targets: neighbours with multiplicity, loops dropped."""
        if self._out is None:
            ind, ptr = self.indices.tolist(), self.indptr.tolist()
            self._out = [[u for u in ind[ptr[v]:ptr[v + 1]] if u != v] for v in range(self.n)]
        return self._out

    def distinct_neighbors(self, v: int) -> set[int]:
        return set(self.neighbors(v).tolist()) - {v}

    def induced(self, vertices: Sequence[int]) -> tuple["Graph", np.ndarray]:
        """Induced subgraph; returns it with the local-to-global vertex map."""
        vmap = np.asarray(sorted(set(int(v) for v in vertices)), dtype=np.int64)
        loc = np.full(self.n, -1, dtype=np.int64)
        loc[vmap] = np.arange(vmap.size)
        a, b = loc[self.edges[:, 0]], loc[self.edges[:, 1]]
        keep = (a >= 0) & (b >= 0)
        return Graph(vmap.size, np.column_stack((a[keep], b[keep]))), vmap

    def cyclomatic_number(self) -> int:
        """m - n + (number of components); counts loops and parallel edges."""
        return self.m - self.n + n_components(self)

    def write(self, path, footer: Iterable[str] = ()) -> None:
        lines = [f"{self.n} {self.m}"]
        lines += [f"{u} {v}" for u, v in self.edges.tolist()]
        lines += [f"# {line}" for line in footer]
        Path(path).write_text("\n".join(lines) + "\n")

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def bfs_distances(g: Graph, sources: Iterable[int], max_dist: int | None = None) -> np.ndarray:
    """Multi-source BFS distances; unreached vertices get -1."""
    dist = np.full(g.n, -1, dtype=np.int64)
    q = deque()
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            q.append(int(s))
    ind, ptr = g.indices, g.indptr
    while q:
        v = q.popleft()
        dv = dist[v]
        if max_dist is not None and dv >= max_dist:
            continue
        for u in ind[ptr[v]:ptr[v + 1]]:
            if dist[u] < 0:
                dist[u] = dv + 1
                q.append(int(u))
    return dist


def n_components(g: Graph) -> int:
    seen = np.zeros(g.n, dtype=bool)
    count = 0
    for v in range(g.n):
        if not seen[v]:
            count += 1
            seen[bfs_distances(g, [v]) >= 0] = True
    return count


@dataclass(frozen=True, eq=False)
class RootedGraph:
    """A graph with a root, a shape tag and cycle metadata.

    ``cycles`` lists each cycle as a vertex sequence in cyclic order. For
    ``gwc1``/``gwc2`` the single cycle starts at the root ``v1``.
    """

    graph: Graph
    root: int
    shape: str
    params: dict = field(default_factory=dict)
    cycles: tuple = ()

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ShapeError(f"unknown shape {self.shape!r}")
        object.__setattr__(self, "cycles", tuple(tuple(int(v) for v in c) for c in self.cycles))
        object.__setattr__(self, "depth", bfs_distances(self.graph, [self.root]))

    @property
    def n(self) -> int:
        return self.graph.n

    def cycle_distance(self) -> np.ndarray:
        verts = [v for c in self.cycles for v in c]
        if not verts:
            return np.full(self.n, -1, dtype=np.int64)
        return bfs_distances(self.graph, verts)

    def tree_children(self) -> list[list[int]]:
        """Children in the BFS tree from the root (trees only)."""
        if self.shape != "tree":
            raise ShapeError("tree_children needs a tree")
        kids = [[] for _ in range(self.n)]
        depth = self.depth
        for v in range(self.n):
            for u in self.graph.neighbors(v).tolist():
                if depth[u] == depth[v] + 1:
                    kids[v].append(u)
        return kids

    def leaf_set(self, l: int) -> np.ndarray:
        """Vertices whose strong infections are counted at level ``l``.

        Trees: vertices at depth exactly ``l``. GWC shapes: tree vertices at
        distance exactly ``l`` from the cycle. EGW and cyclic balls: vertices
        with ``dist(v, root) >= l`` and ``dist(v, C) >= l - h``.
        """
        depth = self.depth
        if self.shape == "tree" or (self.shape == "ball" and not self.cycles):
            return np.nonzero(depth == l)[0]
        if self.shape in ("gwc1", "gwc2"):
            if not self.cycles:  # gwc2 with m = 1 is a bare vertex
                return np.nonzero(depth == l)[0] if l == 0 else np.array([], dtype=np.int64)
            cd = self.cycle_distance()
            out = cd == l
            if self.shape == "gwc2" and l == 0:
                out[self.root] = False
            return np.nonzero(out)[0]
        h = int(self.params["h"])
        cd = self.cycle_distance()
        return np.nonzero((depth >= l) & ((cd < 0) | (cd >= l - h)))[0]

    def write(self, path) -> None:
        footer = [f"root {self.root}", f"shape {self.shape}"]
        footer += [f"param {k} {v}" for k, v in sorted(self.params.items())
                   if isinstance(v, (int, float, str))]
        footer += ["cycle " + " ".join(map(str, c)) for c in self.cycles]
        self.graph.write(path, footer)


def read_graph(path) -> Graph | RootedGraph:
    """Load a graph file; returns a :class:`RootedGraph` if a root footer is present."""
    n = m = None
    edges, root, shape, params, cycles = [], None, "graph", {}, []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if not parts:
                continue
            if parts[0] == "root":
                root = int(parts[1])
            elif parts[0] == "shape":
                shape = parts[1]
            elif parts[0] == "param":
                val = parts[2]
                try:
                    params[parts[1]] = int(val)
                except ValueError:
                    try:
                        params[parts[1]] = float(val)
                    except ValueError:
                        params[parts[1]] = val
            elif parts[0] == "cycle":
                cycles.append(tuple(int(x) for x in parts[1:]))
            continue
        a, b = line.split()
        if n is None:
            n, m = int(a), int(b)
        else:
            edges.append((int(a), int(b)))
    if n is None:
        raise ValueError(f"{path}: missing 'n m' header")
    if len(edges) != m:
        raise ValueError(f"{path}: header declares {m} edges, found {len(edges)}")
    g = Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
    if root is None:
        return g
    return RootedGraph(g, root, shape, params, tuple(cycles))


# --------------------------------------------------------------------------
# configuration model and matchings
# --------------------------------------------------------------------------

def pair_half_edges(degrees: np.ndarray, rng: np.random.Generator) -> Graph:
    """Uniform perfect matching of the half-edges given by ``degrees``."""
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.sum() % 2:
        raise ValueError("degree sum must be even")
    stubs = np.repeat(np.arange(degrees.size), degrees)
    stubs = rng.permutation(stubs)
    return Graph(degrees.size, stubs.reshape(-1, 2))


def configuration_model(n: int, mu: DegreeDistribution, rng: np.random.Generator,
                        max_attempts: int = 10_000) -> Graph:
    """Configuration-model multigraph with i.i.d. degrees from ``mu``.

    The whole degree sequence is redrawn until its sum is even.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if mu.support.size == 1 and (mu.kmax * n) % 2:
        raise ValueError(f"point({mu.kmax}) with n={n} never has an even degree sum")
    for _ in range(max_attempts):
        degrees = mu.sample(rng, n)
        if degrees.sum() % 2 == 0:
            return pair_half_edges(degrees, rng)
    raise RuntimeError("could not draw an even degree sum")


def cutoff_line_pairs(degree_seq: Sequence[int], rng: np.random.Generator) -> list[tuple[int, int]]:
    """Cut-off line matching as pairs of half-edge indices.

    Half-edges are numbered vertex by vertex. Each gets an independent
    uniform height. Unmatched half-edges are taken in index order (a choice
    that ignores heights) and each is matched to the highest half-edge still
    unmatched; the cut-off line is the height of that partner.
    """
    degrees = np.asarray(degree_seq, dtype=np.int64)
    if degrees.sum() % 2:
        raise ValueError("degree sum must be even")
    total = int(degrees.sum())
    h = rng.random(total)
    by_height = np.argsort(-h, kind="stable").tolist()
    matched = np.zeros(total, dtype=bool)
    top = 0
    pairs = []
    for x in range(total):
        if matched[x]:
            continue
        matched[x] = True
        while matched[by_height[top]]:
            top += 1
        y = by_height[top]
        matched[y] = True
        pairs.append((x, y))
    return pairs


def cutoff_line_match(degree_seq: Sequence[int], rng: np.random.Generator) -> Graph:
    """Multigraph of :func:`cutoff_line_pairs`."""
    degrees = np.asarray(degree_seq, dtype=np.int64)
    owner = np.repeat(np.arange(degrees.size), degrees)
    pairs = cutoff_line_pairs(degrees, rng)
    edges = [(owner[x], owner[y]) for x, y in pairs]
    return Graph(degrees.size, np.array(edges, dtype=np.int64).reshape(-1, 2))


def erdos_renyi(n: int, mean_degree: float, rng: np.random.Generator) -> Graph:
    """G(n, p) with p = mean_degree / (n - 1)."""
    p = mean_degree / max(n - 1, 1)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return Graph(n, np.column_stack((iu[keep], ju[keep])))


# --------------------------------------------------------------------------
# Galton-Watson families
# --------------------------------------------------------------------------

def _grow(parents_edges: list, start: int, next_id: int, root_law: DegreeDistribution,
          law: DegreeDistribution, depth: int, rng) -> int:
    """Hang a GW tree of the given depth below ``start``; returns the next free id."""
    level = np.array([start], dtype=np.int64)
    for d in range(depth):
        counts = (root_law if d == 0 else law).sample(rng, level.size)
        total = int(counts.sum())
        if total == 0:
            break
        kids = np.arange(next_id, next_id + total, dtype=np.int64)
        parents_edges.append(np.column_stack((np.repeat(level, counts), kids)))
        next_id += total
        level = kids
    return next_id


def _stack(parts) -> np.ndarray:
    return np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)


def gen_gw_tree(xi_root: DegreeDistribution, xi: DegreeDistribution, depth: int,
                rng: np.random.Generator) -> RootedGraph:
    """GW tree truncated at ``depth``: root offspring ``xi_root``, others ``xi``."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    parts = []
    n = _grow(parts, 0, 1, xi_root, xi, depth, rng)
    return RootedGraph(Graph(n, _stack(parts)), 0, "tree", {"depth": depth})


def gw_level_sizes(xi_root: DegreeDistribution, xi: DegreeDistribution, depth: int,
                   reps: int, rng: np.random.Generator, chunk: int = 1000) -> np.ndarray:
    """Level sizes Z_0..Z_depth of independent GW trees, shape (reps, depth+1)."""
    out = np.zeros((reps, depth + 1), dtype=np.int64)
    out[:, 0] = 1
    for lo in range(0, reps, chunk):
        hi = min(reps, lo + chunk)
        z = np.ones(hi - lo, dtype=np.int64)
        for s in range(1, depth + 1):
            law = xi_root if s == 1 else xi
            total = int(z.sum())
            if total == 0:
                break
            draws = law.sample(rng, total)
            owner = np.repeat(np.arange(z.size), z)
            z = np.bincount(owner, weights=draws, minlength=z.size).astype(np.int64)
            out[lo:hi, s] = z
    return out


def gen_gwc(kind: int, xi: DegreeDistribution, m: int, l: int,
            rng: np.random.Generator) -> RootedGraph:
    """Galton-Watson trees hanging on an m-cycle ``v1 .. vm`` (root ``v1`` = 0).

    ``kind=1`` hangs an independent GW(xi) tree of depth ``l`` at every cycle
    vertex; ``kind=2`` leaves ``v1`` bare. ``kind=1, m=1`` is a plain GW tree.
    """
    if kind not in (1, 2) or m < 1 or l < 0:
        raise ValueError("need kind in {1, 2}, m >= 1, l >= 0")
    if kind == 1 and m == 1:
        t = gen_gw_tree(xi, xi, l, rng)
        return RootedGraph(t.graph, 0, "tree", {"depth": l, "gwc_kind": 1, "m": 1})
    parts = []
    if m >= 2:
        cyc = np.arange(m, dtype=np.int64)
        parts.append(np.column_stack((cyc, np.roll(cyc, -1))))
    n = m
    for v in range(0 if kind == 1 else 1, m):
        n = _grow(parts, v, n, xi, xi, l, rng)
    cycles = (tuple(range(m)),) if m >= 2 else ()
    shape = "gwc1" if kind == 1 else "gwc2"
    return RootedGraph(Graph(n, _stack(parts)), 0, shape, {"m": m, "l": l}, cycles)


def gen_egw(xi: DegreeDistribution, xi2: DegreeDistribution, h: int, m: int, L: int,
            rng: np.random.Generator, attempts: int = 100_000) -> RootedGraph:
    """Edge-added GW graph.

    A GW tree of depth ``L`` (root offspring ``xi``, others ``xi2``) is drawn
    conditioned on reaching depth ``h`` by rejection. Every depth-``h``
    vertex ``u`` then becomes ``v1`` of a fresh m-cycle whose other vertices
    carry GW(xi2) trees of depth ``L - h``; ``u`` keeps its own subtree.
    """
    if m < 2 or not 0 <= h <= L:
        raise ValueError("need m >= 2 and 0 <= h <= L")
    for _ in range(attempts):
        t = gen_gw_tree(xi, xi2, L, rng)
        tops = np.nonzero(t.depth == h)[0]
        if tops.size:
            break
    else:
        raise RuntimeError(f"no GW tree reached depth {h} in {attempts} attempts")
    parts = [t.graph.edges.copy()]
    n = t.n
    cycles = []
    for u in tops.tolist():
        ring = [u] + list(range(n, n + m - 1))
        n += m - 1
        parts.append(np.array([(ring[i], ring[(i + 1) % m]) for i in range(m)], dtype=np.int64))
        for v in ring[1:]:
            n = _grow(parts, v, n, xi2, xi2, L - h, rng)
        cycles.append(tuple(ring))
    return RootedGraph(Graph(n, _stack(parts)), 0, "egw", {"h": h, "m": m, "L": L}, tuple(cycles))


def validate_shape(rg: RootedGraph) -> None:
    """Raise :class:`ShapeError` unless ``rg`` matches its declared shape."""
    g = rg.graph
    if np.any(rg.depth < 0):
        raise ShapeError("graph is not connected")
    beta = g.cyclomatic_number()
    if rg.shape == "tree":
        if beta != 0:
            raise ShapeError("tree has a cycle")
        return
    if rg.shape in ("gwc1", "gwc2"):
        m = int(rg.params["m"])
        if m == 1 and rg.shape == "gwc2":
            if g.n != 1:
                raise ShapeError("gwc2 with m=1 is a single vertex")
            return
        if beta != 1 or len(rg.cycles) != 1 or len(rg.cycles[0]) != m:
            raise ShapeError("expected exactly one cycle of length m")
        if rg.cycles[0][0] != rg.root:
            raise ShapeError("cycle must start at the root")
        _check_cycle(g, rg.cycles[0])
        if rg.shape == "gwc2" and g.degree(rg.root) != 2:
            raise ShapeError("gwc2 root must carry no tree")
        return
    if rg.shape == "egw":
        m, h = int(rg.params["m"]), int(rg.params["h"])
        if beta != len(rg.cycles):
            raise ShapeError("cycle metadata does not match cycle count")
        for c in rg.cycles:
            if len(c) != m:
                raise ShapeError("cycle of wrong length")
            _check_cycle(g, c)
            if min(rg.depth[list(c)]) != h:
                raise ShapeError("cycle not at distance h from the root")
        return
    if rg.shape == "ball":
        if beta > 1:
            raise ShapeError("ball holds more than one cycle")


def _check_cycle(g: Graph, cyc: Sequence[int]) -> None:
    m = len(cyc)
    for i in range(m):
        a, b = cyc[i], cyc[(i + 1) % m]
        if b not in g.neighbors(a).tolist():
            raise ShapeError(f"cycle edge {a}-{b} missing")


# --------------------------------------------------------------------------
# balls
# --------------------------------------------------------------------------

def two_core_cycle(g: Graph) -> list[int]:
    """Vertices of the unique cycle of a connected unicyclic graph, in cyclic order."""
    deg = g.degree_seq.astype(np.int64).copy()
    alive = np.ones(g.n, dtype=bool)
    q = deque(np.nonzero(deg <= 1)[0].tolist())
    while q:
        v = q.popleft()
        if not alive[v]:
            continue
        alive[v] = False
        for u in g.neighbors(v).tolist():
            if alive[u]:
                deg[u] -= 1
                if deg[u] == 1:
                    q.append(u)
    core = np.nonzero(alive)[0].tolist()
    if len(core) <= 2:
        return core
    order = [core[0]]
    prev = -1
    cur = core[0]
    core_set = set(core)
    while True:
        nxt = [u for u in g.neighbors(cur).tolist() if u in core_set and u != prev and u != cur]
        if not nxt or nxt[0] == order[0]:
            break
        prev, cur = cur, nxt[0]
        order.append(cur)
    return order


@dataclass(frozen=True, eq=False)
class Ball:
    """Local block around ``center``; ``subgraph`` uses local vertex ids."""

    subgraph: RootedGraph
    center: int
    radius: int
    vertex_map: np.ndarray
    cycle: tuple | None = None
    h: int | None = None

    @property
    def vertices(self) -> set[int]:
        return set(self.vertex_map.tolist())

    def leaf_set(self) -> np.ndarray:
        """Local ids of the bottom leaves."""
        sg = self.subgraph
        if self.cycle is None:
            return np.nonzero(sg.depth == self.radius)[0]
        cd = sg.cycle_distance()
        return np.nonzero((sg.depth >= self.radius) & (cd >= self.radius - self.h))[0]

    def global_leaves(self) -> np.ndarray:
        return self.vertex_map[self.leaf_set()]


def neighborhood_ball(g: Graph, v: int, r: int, extended: bool = False) -> Ball:
    """Block ``B_v`` (or ``B_v+`` with radius ``10 r`` when ``extended``).

    If the induced ``r``-neighbourhood is a tree it is the block. Otherwise it
    holds a single cycle ``C`` at distance ``h`` and the block is
    ``N(v, r)`` together with ``N(u, r - h)`` for every ``u`` on ``C``.
    """
    radius = 10 * r if extended else r
    dist = bfs_distances(g, [v], radius)
    near = np.nonzero(dist >= 0)[0]
    sub, vmap = g.induced(near)
    beta = sub.m - sub.n + 1
    if beta == 0:
        rg = RootedGraph(sub, int(np.searchsorted(vmap, v)), "ball", {"r": radius})
        return Ball(rg, v, radius, vmap)
    if beta > 1:
        raise MultiCycleError(f"{beta} independent cycles within distance {radius} of {v}")
    cyc_local = two_core_cycle(sub)
    cyc = [int(vmap[u]) for u in cyc_local]
    h = int(min(dist[cyc]))
    extra = bfs_distances(g, cyc, radius - h)
    verts = np.union1d(near, np.nonzero(extra >= 0)[0])
    sub, vmap = g.induced(verts)
    if sub.m - sub.n + 1 > 1:
        raise MultiCycleError(f"extended block around {v} holds more than one cycle")
    loc = {int(u): i for i, u in enumerate(vmap.tolist())}
    rg = RootedGraph(sub, loc[v], "ball", {"r": radius, "h": h},
                     (tuple(loc[u] for u in cyc),))
    return Ball(rg, v, radius, vmap, tuple(cyc), h)


# --------------------------------------------------------------------------
# long path search
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LongPath:
    """Path ``vertices`` with disjoint private outside neighbours per vertex."""

    vertices: tuple
    private: tuple
    A: int


def long_path_length(n: int, mu: DegreeDistribution, A: int) -> int:
    """L = floor(0.9 log n / (-log mu[A, inf)))."""
    tail = mu.tail(A)
    if not 0 < tail < 1:
        raise ValueError("mu[A, inf) must lie strictly between 0 and 1")
    return int(math.floor(0.9 * math.log(n) / -math.log(tail)))


def validate_long_path(g: Graph, path: LongPath) -> bool:
    """Check the path property: consecutive adjacency and A-2 disjoint private neighbours each."""
    vs = list(path.vertices)
    if len(set(vs)) != len(vs):
        return False
    on_path = set(vs)
    for a, b in zip(vs, vs[1:]):
        if b not in g.distinct_neighbors(a):
            return False
    seen = set()
    for v, priv in zip(vs, path.private):
        priv = set(priv)
        if len(priv) < path.A - 2 or not priv <= g.distinct_neighbors(v):
            return False
        if priv & on_path or priv & seen:
            return False
        seen |= priv
    return True


def find_long_path(g: Graph, A: int, L: int, rounds: int | None = None,
                   rng: np.random.Generator | None = None) -> LongPath | None:
    """Greedy randomised search for a path of ``L`` vertices with private neighbours.

    Each round starts at a random vertex and walks forward, reserving ``A-2``
    fresh neighbours of the current vertex as its private set and moving to
    another fresh neighbour. A round fails on the first vertex without enough
    fresh neighbours. The returned path always passes
    :func:`validate_long_path`; ``None`` means the round budget ran out.
    """
    if A < 3:
        raise ValueError("A must be at least 3")
    if L < 1:
        raise ValueError("L must be positive")
    rng = rng or np.random.default_rng()
    if rounds is None:
        rounds = int(min(g.n ** 0.95, 1e6))
    ndist = _distinct_counts(g)
    starts = np.nonzero(ndist >= A - 1)[0]
    if starts.size == 0:
        return None
    need = A - 2
    for _ in range(rounds):
        cur = int(starts[rng.integers(starts.size)])
        used = {cur}
        path, private = [cur], []
        ok = True
        for i in range(L):
            fresh = [u for u in g.distinct_neighbors(cur) if u not in used]
            last = i == L - 1
            if len(fresh) < need + (0 if last else 1):
                ok = False
                break
            rng.shuffle(fresh)
            nxt = None
            if not last:
                # prefer a successor that can itself continue the path
                for j, u in enumerate(fresh):
                    if ndist[u] >= A - 1:
                        nxt = fresh.pop(j)
                        break
                if nxt is None:
                    ok = False
                    break
            priv = fresh[:need]
            used.update(priv)
            private.append(tuple(priv))
            if nxt is not None:
                used.add(nxt)
                path.append(nxt)
                cur = nxt
        if ok:
            res = LongPath(tuple(path), tuple(private), A)
            if not validate_long_path(g, res):  # pragma: no cover - guarded by construction
                raise AssertionError("long-path search produced an invalid path")
            return res
    return None


def _distinct_counts(g: Graph) -> np.ndarray:
    src = np.repeat(np.arange(g.n), g.degree_seq)
    dst = g.indices
    keep = src != dst
    pairs = np.unique(np.column_stack((src[keep], dst[keep])), axis=0)
    return np.bincount(pairs[:, 0], minlength=g.n)


def star_of_stars(L: int, k: int) -> Graph:
    """Spine path of ``L`` vertices, each carrying ``k`` private leaves."""
    edges = [(i, i + 1) for i in range(L - 1)]
    nxt = L
    for i in range(L):
        for _ in range(k):
            edges.append((i, nxt))
            nxt += 1
    return Graph(nxt, np.array(edges, dtype=np.int64).reshape(-1, 2))


def star_graph(k: int) -> Graph:
    return star_of_stars(1, k)
