"""Event-driven simulation of the contact process and its starred variant.

Every vertex ``u`` owns a stream of clock events at total rate
``1 + lam * deg(u)``: a recovery with probability ``1 / (1 + lam deg(u))``,
otherwise an infection along one of its (directed, loop-free) edge slots,
chosen uniformly. This is the graphical representation with the per-vertex
recovery clock and the per-edge infection clocks merged by superposition.

Two clock sources are provided:

* :class:`GraphicalTimeline` realises every clock up to a horizon, so
  several runs can read identical clocks (exact couplings);
* :class:`LazyClocks` reveals each vertex's next event on demand, which is
  equal in law and needs no horizon.

In the starred process an infection reaching a healthy vertex only takes
hold (state ``STAR``) if that vertex's next own event is an outgoing
infection; otherwise it is ignored. A vertex that fires an infection drops
from ``STAR`` to ``INFECTED``.
"""
from __future__ import annotations

import heapq
import math
from bisect import bisect_left, bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graph_gen import Graph, RootedGraph, neighborhood_ball

HEALTHY, INFECTED, STAR = 0, 1, 2
STATE_NAMES = {HEALTHY: "healthy", INFECTED: "infected", STAR: "star"}
INF = math.inf


class CouplingError(AssertionError):
    """A coupled run broke the domination it is supposed to satisfy."""


# --------------------------------------------------------------------------
# clock sources
# --------------------------------------------------------------------------

class _Draws:
    """Buffered standard exponentials and uniforms from a numpy Generator."""

    __slots__ = ("rng", "size", "_e", "_u", "_ie", "_iu")

    def __init__(self, rng: np.random.Generator, size: int = 4096):
        self.rng = rng
        self.size = size
        self._e = rng.standard_exponential(size).tolist()
        self._u = rng.random(size).tolist()
        self._ie = 0
        self._iu = 0

    def exp(self) -> float:
        if self._ie == self.size:
            self._e = self.rng.standard_exponential(self.size).tolist()
            self._ie = 0
        x = self._e[self._ie]
        self._ie += 1
        return x

    def unif(self) -> float:
        if self._iu == self.size:
            self._u = self.rng.random(self.size).tolist()
            self._iu = 0
        x = self._u[self._iu]
        self._iu += 1
        return x


class LazyClocks:
    """Own-clock streams revealed one event at a time.

    Once revealed, a vertex's next event stays fixed until it has passed,
    so a lookahead made for a weak infection is honoured by later queries.
    """

    def __init__(self, out: list[list[int]], lam: float, draws: _Draws):
        self.out = out
        self.lam = lam
        self.rates = [1.0 + lam * len(o) for o in out]
        self.draws = draws
        self.pending: dict[int, tuple[float, int]] = {}

    def reset(self) -> None:
        self.pending.clear()

    def next_after(self, u: int, t: float) -> tuple[float, int]:
        ev = self.pending.get(u)
        if ev is not None and ev[0] > t:
            return ev
        rate = self.rates[u]
        d = self.draws
        time = t + d.exp() / rate
        x = d.unif() * rate
        if x < 1.0:
            ev = (time, -1)
        else:
            nb = self.out[u]
            ev = (time, nb[min(int((x - 1.0) / self.lam), len(nb) - 1)])
        self.pending[u] = ev
        return ev

    def force_infection(self, u: int, t: float) -> tuple[float, int]:
        """Reveal the next event of ``u`` conditioned on being an infection."""
        nb = self.out[u]
        if not nb or self.lam <= 0:
            raise ValueError(f"vertex {u} cannot fire an infection")
        d = self.draws
        time = t + d.exp() / self.rates[u]
        ev = (time, nb[min(int(d.unif() * len(nb)), len(nb) - 1)])
        self.pending[u] = ev
        return ev


class GraphicalTimeline:
    """All recovery and infection clocks of a graph realised on ``[0, horizon]``.

    Attributes
    ----------
    times : list of list of float
        Sorted own-event times per vertex.
    slots : list of list of int
        ``-1`` for a recovery, else the index of the fired edge slot in
        ``out[u]`` (parallel edges are distinct slots).
    """

    def __init__(self, g: Graph, lam: float, horizon: float, rng: np.random.Generator,
                 seed=None):
        self.n = g.n
        self.lam = lam
        self.horizon = float(horizon)
        self.seed = seed
        self.out = g.out_lists()
        self.times: list[list[float]] = []
        self.slots: list[list[int]] = []
        self.targets: list[list[int]] = []
        for u in range(g.n):
            k = len(self.out[u])
            rate = 1.0 + lam * k
            cnt = rng.poisson(rate * horizon)
            ts = np.sort(rng.uniform(0.0, horizon, cnt))
            x = rng.random(cnt) * rate
            slot = np.where(x < 1.0, -1, np.minimum(((x - 1.0) / lam) if lam > 0 else 0, k - 1))
            slot = slot.astype(np.int64)
            self.times.append(ts.tolist())
            self.slots.append(slot.tolist())
            nb = self.out[u]
            self.targets.append([nb[s] if s >= 0 else -1 for s in slot.tolist()])

    @property
    def event_count(self) -> int:
        return sum(len(t) for t in self.times)

    def recovery_times(self, u: int) -> np.ndarray:
        return np.array([t for t, s in zip(self.times[u], self.slots[u]) if s < 0])

    def infection_times(self, u: int, slot: int) -> np.ndarray:
        return np.array([t for t, s in zip(self.times[u], self.slots[u]) if s == slot])

    def next_after(self, u: int, t: float) -> tuple[float, int]:
        ts = self.times[u]
        i = bisect_right(ts, t)
        if i == len(ts):
            return (INF, -1)
        return (ts[i], self.targets[u][i])

    def next_recovery_after(self, u: int, t: float) -> float:
        ts, sl = self.times[u], self.slots[u]
        for i in range(bisect_right(ts, t), len(ts)):
            if sl[i] < 0:
                return ts[i]
        return INF

    def force_infection(self, u, t):
        raise ValueError("a realised timeline cannot be conditioned; use on-the-fly mode")


def build_timeline(g: Graph, lam: float, horizon: float, rng: np.random.Generator,
                   memory_guard: float = 5e7, seed=None) -> GraphicalTimeline:
    """Realise all clocks of ``g`` up to ``horizon``.

    Raises ``MemoryError`` when the expected number of events exceeds
    ``memory_guard``; on-the-fly mode needs no horizon.
    """
    if not horizon > 0 or not math.isfinite(horizon):
        raise ValueError("horizon must be positive and finite")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    expected = (g.n + lam * sum(len(o) for o in g.out_lists())) * horizon
    if expected > memory_guard:
        raise MemoryError(f"timeline would hold ~{expected:.3g} events (guard {memory_guard:.3g}); "
                          "use on-the-fly mode or a shorter horizon")
    return GraphicalTimeline(g, lam, horizon, rng, seed)


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Initial states plus every state change ``(time, vertex, event, new_state)``."""

    initial: list
    events: list = field(default_factory=list)
    end_time: float = 0.0
    censored: bool = False

    def states_at(self, t: float) -> list:
        s = list(self.initial)
        for time, u, _, new in self.events:
            if time > t:
                break
            s[u] = new
        return s

    def infected_at(self, t: float) -> set:
        return {u for u, x in enumerate(self.states_at(t)) if x != HEALTHY}

    def to_csv(self, path) -> None:
        rows = ["time,vertex,event,new_state"]
        rows += [f"0,{u},init,{STATE_NAMES[x]}" for u, x in enumerate(self.initial) if x]
        rows += [f"{t!r},{u},{ev},{STATE_NAMES[x]}" for t, u, ev, x in self.events]
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


@dataclass
class ExcursionReport:
    """Summary of one run.

    ``excursion_time`` is set for root-added runs, ``survival_time`` for
    runs that end when every vertex is healthy. ``leaf_counts`` maps each
    leaf to its number of healthy-to-star transitions.
    """

    excursion_time: float | None = None
    survival_time: float | None = None
    leaf_counts: dict = field(default_factory=dict)
    censored: bool = False

    @property
    def total_leaf_count(self) -> int:
        return int(sum(self.leaf_counts.values()))

    def to_dict(self) -> dict:
        return {"excursion_time": self.excursion_time, "survival_time": self.survival_time,
                "leaf_counts": {str(k): v for k, v in self.leaf_counts.items()},
                "total_leaf_count": self.total_leaf_count, "censored": self.censored}


@dataclass
class Run:
    report: ExcursionReport
    trajectory: Trajectory | None


@dataclass
class _Outcome:
    end: float
    censored: bool
    events: list | None
    leaf_hits: list  # (time, vertex) of healthy -> star transitions at leaves
    state: list


# --------------------------------------------------------------------------
# event loop
# --------------------------------------------------------------------------

def _simulate(clocks, state: list, *, starred: bool, horizon: float = INF,
              permanent: Iterable[int] = (), leaves=None, sticky: int | None = None,
              ignore=None, record: bool = False) -> _Outcome:
    """Run until no non-permanent vertex is infected or ``horizon`` passes.

    ``state`` is modified in place. ``sticky`` names a vertex whose
    recoveries are ignored while any other non-permanent vertex is infected;
    ``ignore(u, t)`` suppresses individual recoveries.
    """
    perm = set(permanent)
    heap = []
    active = 0
    nxt = clocks.next_after
    for u, s in enumerate(state):
        if s != HEALTHY:
            if u not in perm:
                active += 1
            t1, w = nxt(u, 0.0)
            heap.append((t1, u, w))
    heapq.heapify(heap)
    events = [] if record else None
    hits = []
    push, pop = heapq.heappush, heapq.heappop
    now = 0.0
    if active == 0:
        return _Outcome(0.0, False, events, hits, state)
    while heap:
        t, u, w = pop(heap)
        if t > horizon:
            return _Outcome(horizon, True, events, hits, state)
        now = t
        if w < 0:
            if (u in perm or (sticky == u and active > 1)
                    or (ignore is not None and ignore(u, t))):
                if record:
                    events.append((t, u, "ignored", state[u]))
            else:
                state[u] = HEALTHY
                active -= 1
                if record:
                    events.append((t, u, "recover", HEALTHY))
                if active == 0:
                    return _Outcome(t, False, events, hits, state)
                continue
        else:
            if state[w] == HEALTHY:
                if starred:
                    ev = nxt(w, t)
                    if ev[1] >= 0:
                        state[w] = STAR
                        active += 1
                        push(heap, (ev[0], w, ev[1]))
                        if record:
                            events.append((t, w, "infect", STAR))
                        if leaves is not None and leaves[w]:
                            hits.append((t, w))
                else:
                    state[w] = INFECTED
                    active += 1
                    ev = nxt(w, t)
                    push(heap, (ev[0], w, ev[1]))
                    if record:
                        events.append((t, w, "infect", INFECTED))
            if state[u] == STAR:
                state[u] = INFECTED
                if record:
                    events.append((t, u, "demote", INFECTED))
        ev = nxt(u, t)
        push(heap, (ev[0], u, ev[1]))
    return _Outcome(horizon if active else now, bool(active), events, hits, state)


def _initial_states(n: int, initial: Iterable[int]) -> list:
    state = [HEALTHY] * n
    for u in initial:
        state[int(u)] = INFECTED
    return state


def _starred_initial(clocks, n: int, initial: Iterable[int]) -> list:
    """Star-infected iff the vertex's first own event is an outgoing infection."""
    state = [HEALTHY] * n
    for u in initial:
        if clocks.next_after(int(u), 0.0)[1] >= 0:
            state[int(u)] = STAR
    return state


def _clock_source(g: Graph, lam: float, mode: str, horizon: float, rng, timeline):
    if timeline is not None:
        if timeline.n != g.n or timeline.lam != lam:
            raise ValueError("timeline was built for a different graph or rate")
        return timeline, min(horizon, timeline.horizon)
    if mode == "timeline":
        if rng is None:
            raise ValueError("timeline mode needs an rng or a prebuilt timeline")
        tl = build_timeline(g, lam, horizon, rng)
        return tl, horizon
    if mode != "on-the-fly":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("on-the-fly mode needs an rng")
    return LazyClocks(g.out_lists(), lam, _Draws(rng)), horizon


def run_contact(g: Graph, lam: float, initial: Iterable[int], mode: str = "on-the-fly",
                horizon: float = INF, rng: np.random.Generator | None = None,
                timeline: GraphicalTimeline | None = None, record: bool = True,
                ignore=None) -> Run:
    """Standard contact process from ``initial``; survival time censored at ``horizon``."""
    clocks, horizon = _clock_source(g, lam, mode, horizon, rng, timeline)
    state = _initial_states(g.n, initial)
    init = list(state)
    out = _simulate(clocks, state, starred=False, horizon=horizon, ignore=ignore, record=record)
    traj = Trajectory(init, out.events, out.end, out.censored) if record else None
    return Run(ExcursionReport(survival_time=out.end, censored=out.censored), traj)


def run_starred(g: Graph, lam: float, initial: Iterable[int], horizon: float = INF,
                rng: np.random.Generator | None = None, mode: str = "on-the-fly",
                timeline: GraphicalTimeline | None = None, record: bool = True) -> Run:
    """Starred contact process from ``initial`` (survival time counted from 0)."""
    clocks, horizon = _clock_source(g, lam, mode, horizon, rng, timeline)
    state = _starred_initial(clocks, g.n, initial)
    init = list(state)
    out = _simulate(clocks, state, starred=True, horizon=horizon, record=record)
    traj = Trajectory(init, out.events, out.end, out.censored) if record else None
    return Run(ExcursionReport(survival_time=out.end, censored=out.censored), traj)


# --------------------------------------------------------------------------
# coupled runs
# --------------------------------------------------------------------------

def dominates(big: Trajectory, small: Trajectory) -> bool:
    """True if every vertex infected in ``small`` is infected in ``big`` at all times.

    Both trajectories are piecewise constant; the check is made after all
    changes at each change time of either run.
    """
    a, b = list(big.initial), list(small.initial)
    if any(y and not x for x, y in zip(a, b)):
        return False
    ea, eb = big.events, small.events
    i = j = 0
    while i < len(ea) or j < len(eb):
        t = min(ea[i][0] if i < len(ea) else INF, eb[j][0] if j < len(eb) else INF)
        touched = set()
        while i < len(ea) and ea[i][0] == t:
            a[ea[i][1]] = ea[i][3]
            touched.add(ea[i][1])
            i += 1
        while j < len(eb) and eb[j][0] == t:
            b[eb[j][1]] = eb[j][3]
            touched.add(eb[j][1])
            j += 1
        for u in touched:
            if b[u] and not a[u]:
                return False
    return True


@dataclass
class IgnoredRecoveryRun:
    reference: Trajectory
    modified: Trajectory
    ignored_events: int


def _interval_test(v: int, intervals: Sequence[tuple[float, float]]):
    iv = sorted((float(a), float(b)) for a, b in intervals)
    starts = [a for a, _ in iv]

    def ignore(u, t):
        if u != v:
            return False
        i = bisect_right(starts, t) - 1
        return i >= 0 and t <= iv[i][1]

    return ignore


def run_ignored_recoveries(g: Graph, lam: float, initial: Iterable[int], v: int,
                           intervals: Sequence[tuple[float, float]],
                           timeline: GraphicalTimeline) -> IgnoredRecoveryRun:
    """Couple a run with recoveries at ``v`` suppressed on ``intervals`` to a plain run.

    Both runs read ``timeline``. Raises :class:`CouplingError` if the
    modified run fails to dominate the reference pointwise.
    """
    initial = list(initial)
    ref = run_contact(g, lam, initial, timeline=timeline).trajectory
    mod = run_contact(g, lam, initial, timeline=timeline, ignore=_interval_test(v, intervals))
    traj = mod.trajectory
    if not dominates(traj, ref):
        raise CouplingError("ignored-recovery run does not dominate the reference")
    n_ign = sum(1 for e in traj.events if e[2] == "ignored")
    return IgnoredRecoveryRun(ref, traj, n_ign)


@dataclass
class StarredCoupling:
    """Starred run X* and plain run X on one timeline.

    ``bound`` is ``R*`` plus the largest residual healing time of the
    vertices still infected in X at time ``R*`` (or ``R*`` if none are).
    """

    plain: Trajectory
    starred: Trajectory
    R: float
    R_star: float
    bound: float
    contained: bool

    @property
    def unstar_holds(self) -> bool:
        return self.R <= self.bound


def coupled_starred(g: Graph, lam: float, initial: Iterable[int],
                    timeline: GraphicalTimeline) -> StarredCoupling:
    initial = list(initial)
    plain = run_contact(g, lam, initial, timeline=timeline).trajectory
    star = run_starred(g, lam, initial, timeline=timeline).trajectory
    r_star = star.end_time
    left = plain.infected_at(r_star)
    bound = max([r_star] + [timeline.next_recovery_after(u, r_star) for u in left])
    return StarredCoupling(plain, star, plain.end_time, r_star, bound, dominates(plain, star))


# --------------------------------------------------------------------------
# root-added excursions
# --------------------------------------------------------------------------

def tree_weight(lam: float, d: int) -> float:
    return lam * d / (1 + lam * d)


class _RootAdded:
    """Reusable setup for repeated excursions on one rooted graph."""

    def __init__(self, t: RootedGraph, lam: float, variant: str, start, l, rng):
        if variant not in ("plain", "sharp", "otimes"):
            raise ValueError(f"unknown variant {variant!r}")
        g = t.graph
        self.root = t.root
        self.variant = variant
        n = g.n
        if t.shape == "gwc2" or variant == "otimes":
            if variant == "sharp":
                raise ValueError("the sharp variant needs an added parent")
            out = [list(o) for o in g.out_lists()]
            self.permanent = (t.root,)
            self.sticky = None
            if start is None:
                cands, weights = self._start_candidates(t, lam)
                self.starts = cands
                self.start_p = np.asarray(weights) / sum(weights)
            else:
                self.starts, self.start_p = [int(start)], np.array([1.0])
        else:
            out = [list(o) for o in g.out_lists()] + [[t.root]]
            out[t.root] = out[t.root] + [n]
            self.permanent = (n,)
            self.sticky = t.root if variant == "sharp" else None
            self.starts, self.start_p = [t.root if start is None else int(start)], np.array([1.0])
        self.n = len(out)
        self.out = out
        self.leaves = None
        if l is not None:
            mask = [False] * self.n
            for v in t.leaf_set(l).tolist():
                if v not in self.permanent:
                    mask[v] = True
            self.leaves = mask
        self.draws = _Draws(rng)
        self.clocks = LazyClocks(out, lam, self.draws)
        self._cum = np.cumsum(self.start_p).tolist()

    @staticmethod
    def _start_candidates(t: RootedGraph, lam: float):
        g = t.graph
        if t.shape == "gwc2":
            cyc = t.cycles[0] if t.cycles else ()
            if len(cyc) < 2:
                raise ValueError("gwc2 with m=1 has no vertex to start from")
            ends = [cyc[1], cyc[-1]]
            # each end has two cycle edges besides its tree children
            return ends, [tree_weight(lam, g.degree(v)) for v in ends]
        kids = [u for u in g.neighbors(t.root).tolist() if u != t.root]
        if not kids:
            raise ValueError("root has no child to start from")
        return kids, [tree_weight(lam, g.degree(v)) for v in kids]

    def run(self, horizon: float = INF, record: bool = False):
        clocks = self.clocks
        clocks.reset()
        start = self.starts[0]
        if len(self.starts) > 1:
            x = self.draws.unif()
            start = self.starts[min(bisect_left(self._cum, x), len(self.starts) - 1)]
        state = [HEALTHY] * self.n
        for p in self.permanent:
            state[p] = INFECTED
        state[start] = STAR
        clocks.force_infection(start, 0.0)
        init = list(state)
        out = _simulate(clocks, state, starred=True, horizon=horizon,
                        permanent=self.permanent, leaves=self.leaves,
                        sticky=self.sticky, record=record)
        counts = {}
        if self.leaves is not None:
            if self.leaves[start]:
                counts[start] = 1
            for _, v in out.leaf_hits:
                counts[v] = counts.get(v, 0) + 1
        rep = ExcursionReport(excursion_time=out.end, leaf_counts=counts, censored=out.censored)
        return rep, (Trajectory(init, out.events, out.end, out.censored) if record else None)


def run_root_added(t: RootedGraph, lam: float, variant: str = "plain", start=None,
                   horizon: float = INF, rng: np.random.Generator | None = None,
                   l: int | None = None) -> ExcursionReport:
    """One excursion of the root-added starred process.

    ``plain``: a permanently infected parent is attached to the root, which
    starts star-infected. ``sharp``: as plain, but recoveries at the root are
    ignored while any other vertex of ``t`` is infected. ``otimes``: the
    root is permanently infected and a child (chosen with probability
    proportional to its weight unless ``start`` is given) starts
    star-infected. On ``gwc2`` graphs the root ``v1`` is permanently infected
    and ``v2`` or ``vm`` starts star-infected.

    ``l`` selects the leaf level whose healthy-to-star transitions are
    counted (a star-infected start at a leaf counts once).
    """
    if rng is None:
        raise ValueError("an rng is required")
    return _RootAdded(t, lam, variant, start, l, rng).run(horizon)[0]


@dataclass
class ExcursionSample:
    """Per-replica excursion times and leaf counts; censored runs are flagged."""

    times: np.ndarray
    counts: np.ndarray
    censored: np.ndarray

    def _kept(self, x):
        return x[~self.censored]

    @property
    def censor_fraction(self) -> float:
        return float(self.censored.mean())

    def mean_time(self) -> tuple[float, float]:
        x = self._kept(self.times)
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))

    def mean_count(self) -> tuple[float, float]:
        x = self._kept(self.counts).astype(float)
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def sample_excursions(t: RootedGraph, lam: float, reps: int, rng: np.random.Generator,
                      variant: str = "plain", l: int | None = None, start=None,
                      horizon: float = INF) -> ExcursionSample:
    """Repeat :func:`run_root_added` ``reps`` times with one shared setup."""
    setup = _RootAdded(t, lam, variant, start, l, rng)
    times = np.empty(reps)
    counts = np.zeros(reps, dtype=np.int64)
    cens = np.zeros(reps, dtype=bool)
    for i in range(reps):
        rep, _ = setup.run(horizon)
        times[i] = rep.excursion_time
        counts[i] = rep.total_leaf_count
        cens[i] = rep.censored
    return ExcursionSample(times, counts, cens)


def sample_rooted_survival(t: RootedGraph, lam: float, reps: int, rng: np.random.Generator,
                           horizon: float = INF) -> ExcursionSample:
    """Survival times of the starred process on ``t`` alone, root started star-infected."""
    out = t.graph.out_lists()
    draws = _Draws(rng)
    clocks = LazyClocks(out, lam, draws)
    times = np.empty(reps)
    cens = np.zeros(reps, dtype=bool)
    for i in range(reps):
        clocks.reset()
        state = [HEALTHY] * t.n
        state[t.root] = STAR
        clocks.force_infection(t.root, 0.0)
        res = _simulate(clocks, state, starred=True, horizon=horizon)
        times[i], cens[i] = res.end, res.censored
    return ExcursionSample(times, np.zeros(reps, dtype=np.int64), cens)


# --------------------------------------------------------------------------
# decomposed process
# --------------------------------------------------------------------------

@dataclass
class DecompositionReport:
    """Termination time ``R`` and spawn count of the block-decomposed process.

    ``spawn_tree`` lists ``(parent_index, center, start_time)`` per block,
    the initial block first with parent ``-1``.
    """

    R: float
    spawns: int
    spawn_tree: list
    censored: bool = False


class BallCache:
    """Blocks and their clock setups, built once per center."""

    def __init__(self, g: Graph, r: int):
        self.g = g
        self.r = r
        self._balls = {}

    def get(self, v: int):
        entry = self._balls.get(v)
        if entry is None:
            ball = neighborhood_ball(self.g, v, self.r)
            sg = ball.subgraph
            mask = [False] * sg.n
            for u in ball.leaf_set().tolist():
                mask[u] = True
            entry = (ball, sg.graph.out_lists(), mask)
            self._balls[v] = entry
        return entry


def run_decomposed(g: Graph, v: int, lam: float, r: int, horizon: float = INF,
                   rng: np.random.Generator | None = None, spawn_guard: int = 10**6,
                   cache: BallCache | None = None) -> DecompositionReport:
    """Block-decomposed dominating process started from ``v``.

    A starred process runs on the block ``B_v`` with ``v`` star-infected.
    Whenever a bottom leaf ``u`` of a running block turns from healthy to
    star-infected, an independent copy starts on ``B_u`` with ``u``
    star-infected. The result is the time the last copy dies out.
    """
    if rng is None:
        raise ValueError("an rng is required")
    cache = cache or BallCache(g, r)
    if cache.r != r:
        raise ValueError("ball cache was built for another radius")
    draws = _Draws(rng)
    queue = deque([(0.0, v, -1)])
    tree = []
    end = 0.0
    censored = False
    while queue:
        t0, u, parent = queue.popleft()
        idx = len(tree)
        tree.append((parent, u, t0))
        if idx > spawn_guard:
            raise RuntimeError(f"more than {spawn_guard} spawned blocks")
        ball, out, mask = cache.get(u)
        clocks = LazyClocks(out, lam, draws)
        state = [HEALTHY] * len(out)
        center = ball.subgraph.root
        if not out[center] or lam <= 0:
            continue  # the center can never be strongly infected
        state[center] = STAR
        clocks.force_infection(center, 0.0)
        res = _simulate(clocks, state, starred=True, horizon=horizon - t0, leaves=mask)
        end = max(end, t0 + res.end)
        censored |= res.censored
        for t, w in res.leaf_hits:
            queue.append((t0 + t, int(ball.vertex_map[w]), idx))
    return DecompositionReport(end, len(tree) - 1, tree, censored)
