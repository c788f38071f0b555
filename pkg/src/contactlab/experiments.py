"""Seeded experiment procedures: stars, paths of stars, percolation, scaling and tails.

Every procedure takes a master seed (or generator) and is deterministic
given it. Replica ``i`` of master seed ``s`` draws from
``SeedSequence(s, spawn_key=(i,))`` so results do not depend on how
replicas are spread over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, sparse, stats
from scipy.sparse.linalg import expm_multiply, spsolve

from .contact_engine import run_contact
from .distributions import (LAMBDA_MAX, DegreeDistribution, load_distribution,
                            make_tail_profile, size_biased)
from .graph_gen import configuration_model
from .manifest import RunManifest, replica_rng, write_csv
from .recursions import (TailTable, gw_bound_sampler, product_envelope_sampler,
                         tail_profile_check)


@dataclass
class ExperimentConfig:
    """Experiment id, parameters, seed list and output paths."""

    experiment: str
    params: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        reps = self.params.get("reps", 1)
        if int(reps) < 1:
            raise ValueError("reps must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


def wilson_interval(hits: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = hits / trials
    den = 1 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    # the interval touches 0 or 1 exactly when hits is 0 or trials
    lo = 0.0 if hits == 0 else max(0.0, mid - half)
    hi = 1.0 if hits == trials else min(1.0, mid + half)
    return lo, hi


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _fan_out(fn, jobs: list, workers: int = 1) -> list:
    """Map ``fn`` over ``jobs`` in order, optionally in worker processes."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


# --------------------------------------------------------------------------
# star graphs
# --------------------------------------------------------------------------
# The contact process on a star with k leaves lumps exactly to the chain
# (r, n): root state and number of infected leaves.

def star_subgenerator(k: int, lam: float) -> sparse.csr_matrix:
    """Generator of the lumped star chain restricted to non-absorbed states.

    State ``(r, n)`` has index ``r (k + 1) + n - 1`` (``(0, 0)`` is dropped).
    """
    size = 2 * (k + 1)
    rows, cols, vals = [], [], []

    def add(a, b, rate):
        if rate > 0:
            rows.append(a)
            cols.append(b)
            vals.append(rate)

    for r in (0, 1):
        for n in range(k + 1):
            i = r * (k + 1) + n
            if r == 1:
                add(i, n, 1.0)  # root recovers
                if n < k:
                    add(i, i + 1, lam * (k - n))
            elif n > 0:
                add(i, (k + 1) + n, lam * n)
            if n > 0:
                add(i, i - 1, float(n))
    q = sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    q = q - sparse.diags(np.asarray(q.sum(axis=1)).ravel())
    keep = np.arange(1, size)
    return q[keep][:, keep].tocsr()


@dataclass
class StarSurvivalLaw:
    """Survival function of the star started from the infected root alone.

    ``surv`` is exact (matrix exponential) on ``grid``; beyond the last grid
    point the survival decays at the rate ``theta`` that reproduces the
    exact mean.
    """

    k: int
    lam: float
    grid: np.ndarray
    surv: np.ndarray
    mean: float
    theta: float

    @property
    def t_cut(self) -> float:
        return float(self.grid[-1])

    def sf(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.interp(t, self.grid, self.surv)
        s_end = self.surv[-1]
        with np.errstate(over="ignore"):
            tail = s_end * np.exp(-self.theta * (t - self.t_cut))
        return np.where(t <= self.t_cut, inside, tail)

    def quantile(self, q):
        """Time t with P(T > t) = 1 - q."""
        u = 1.0 - np.asarray(q, dtype=float)
        return self._inverse_sf(u)

    def _inverse_sf(self, u):
        u = np.asarray(u, dtype=float)
        s_end = self.surv[-1]
        inside = np.interp(u, self.surv[::-1], self.grid[::-1])
        with np.errstate(divide="ignore"):
            tail = self.t_cut + np.log(s_end / u) / self.theta if self.theta > 0 else np.inf
        return np.where(u >= s_end, inside, tail)

    @property
    def median(self) -> float:
        return float(self.quantile(0.5))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-transform samples of the survival time."""
        u = 1.0 - rng.random(size)  # in (0, 1]
        return np.asarray(self._inverse_sf(u), dtype=float)


def star_survival_law(k: int, lam: float, t_cut: float = 60.0, points: int = 6001) -> StarSurvivalLaw:
    if k < 1:
        raise ValueError("k must be at least 1")
    q = star_subgenerator(k, lam)
    start = k  # (r, n) = (1, 0)
    p0 = np.zeros(q.shape[0])
    p0[start] = 1.0
    grid = np.linspace(0.0, t_cut, points)
    probs = expm_multiply(q.T.tocsc(), p0, start=0.0, stop=t_cut, num=points, endpoint=True)
    surv = np.clip(probs.sum(axis=1), 0.0, 1.0)
    surv = np.minimum.accumulate(surv)
    mean = float(spsolve((-q).tocsc(), np.ones(q.shape[0]))[start])
    s_end = float(surv[-1])
    rest = mean - float(integrate.simpson(surv, x=grid))
    if s_end > 1e-12 and rest > 0:
        theta = s_end / rest
    else:
        # nothing meaningful left beyond the grid; fall back to the local slope
        a, b = surv[-2], s_end
        theta = math.log(a / b) / (grid[-1] - grid[-2]) if a > b > 0 else 1.0
    return StarSurvivalLaw(k, lam, grid, surv, mean, float(theta))


def _lumped_star(k: int, lam: float, r: np.ndarray, n: np.ndarray, t_end: float,
                 rng: np.random.Generator, fixed_leaves: int = 0):
    """Advance independent lumped star chains to time ``t_end`` (vectorised).

    ``fixed_leaves`` extra leaves stay infected throughout. Returns final
    ``(r, n)`` and the time each root spent infected.
    """
    r, n = r.astype(np.int64).copy(), n.astype(np.int64).copy()
    t = np.zeros(r.size)
    busy = np.zeros(r.size)
    live = np.arange(r.size)
    while live.size:
        rr, nn = r[live], n[live]
        rates = np.stack([rr * 1.0,                           # root recovery
                          (1 - rr) * lam * (nn + fixed_leaves),  # root infection
                          rr * lam * (k - nn),                 # leaf infection
                          nn * 1.0], axis=1)                   # leaf recovery
        tot = rates.sum(axis=1)
        with np.errstate(divide="ignore"):
            dt = rng.exponential(size=live.size) / tot
        t_new = t[live] + dt
        stop = t_new >= t_end
        busy[live] += rr * (np.minimum(t_new, t_end) - t[live])
        t[live] = t_new
        go = ~stop
        idx = live[go]
        u = rng.random(idx.size) * tot[go]
        ev = (np.cumsum(rates[go], axis=1) <= u[:, None]).sum(axis=1)
        ev = np.minimum(ev, 3)
        r[idx] += np.where(ev == 1, 1, 0) - np.where(ev == 0, 1, 0)
        n[idx] += np.where(ev == 2, 1, 0) - np.where(ev == 3, 1, 0)
        live = idx
    return r, n, busy


@dataclass
class StarReport:
    k: int
    lam: float
    reps: int
    events: dict
    survival: np.ndarray
    mean_survival: float
    median_survival: float
    exact_mean: float
    params: dict

    def rows(self) -> list[dict]:
        out = [{"quantity": f"event_{key}", "value": v["freq"], "hits": v["hits"],
                "trials": v["trials"], "lo": v["ci"][0], "hi": v["ci"][1]}
               for key, v in self.events.items()]
        out += [{"quantity": "mean_survival", "value": self.mean_survival},
                {"quantity": "median_survival", "value": self.median_survival},
                {"quantity": "exact_mean_survival", "value": self.exact_mean}]
        return out


def _event(hits: int, trials: int, **extra) -> dict:
    return {"freq": hits / trials, "hits": int(hits), "trials": int(trials),
            "ci": wilson_interval(int(hits), trials), **extra}


def star_suite(k: int, lam: float, reps: int, rng, M: int | None = None, C: float = 1.0,
               target: float | None = None, law: StarSurvivalLaw | None = None) -> StarReport:
    """Frequencies of the star events and survival statistics of the star.

    (a) from the infected root alone, at least ``C log k`` leaves are
        infected at time 1;
    (b) with ``M`` leaves kept infected and the root healthy at the start,
        the root is infected for at least half of ``[0, 1/2]``;
    (c) from ``M`` infected leaves and a healthy root, at least ``lam k / 100``
        leaves are infected one time unit later;
    (d) survival beyond ``target`` (default ``exp(lam^2 k / 1e5)``).

    Survival times are drawn from the exact law of the lumped chain.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    rng = _as_rng(rng)
    M = min(k, math.ceil(32 / lam)) if M is None else int(M)
    target = math.exp(lam * lam * k / 1e5) if target is None else float(target)
    one, zero = np.ones(reps, dtype=np.int64), np.zeros(reps, dtype=np.int64)
    _, n1, _ = _lumped_star(k, lam, one, zero, 1.0, rng)
    ev = {"a": _event(int((n1 >= C * math.log(k)).sum()), reps, threshold=C * math.log(k))}
    _, _, busy = _lumped_star(0, lam, zero, zero, 0.5, rng, fixed_leaves=M)
    ev["b"] = _event(int((busy >= 0.25).sum()), reps)
    _, n3, _ = _lumped_star(k, lam, zero, np.full(reps, M), 1.0, rng)
    bound = 1 - 3 * math.exp(-lam * M / 128)
    ev["c"] = _event(int((n3 >= lam * k / 100).sum()), reps, bound=bound)
    law = law or star_survival_law(k, lam)
    surv = law.sample(rng, reps)
    ev["d"] = _event(int((surv > target).sum()), reps, target=target)
    return StarReport(k, lam, reps, ev, surv, float(surv.mean()), float(np.median(surv)),
                      law.mean, {"M": M, "C": C, "target": target})


def star_growth(ks, lam: float, reps: int, seed: int) -> dict:
    """Median survival per ``k`` and the linear fit of log-median against ``k``."""
    medians = []
    for j, k in enumerate(ks):
        law = star_survival_law(int(k), lam)
        medians.append(float(np.median(law.sample(replica_rng(seed, j), reps))))
    fit = stats.linregress(np.asarray(ks, dtype=float), np.log(medians))
    return {"k": list(ks), "median": medians, "slope": float(fit.slope),
            "r2": float(fit.rvalue**2)}


# --------------------------------------------------------------------------
# percolation grid
# --------------------------------------------------------------------------

def _percolation_once(L: int, p_open: float, horizon: int, rng: np.random.Generator) -> bool:
    occ = np.ones(L, dtype=bool)  # row 0 is open
    for _ in range(horizon):
        u = rng.random((3, L))
        new = occ & (u[1] < p_open)
        new[1:] |= occ[:-1] & (u[0, 1:] < p_open)
        new[:-1] |= occ[1:] & (u[2, :-1] < p_open)
        occ = new
        if not occ.any():
            return False
    return True


def percolation_grid(L: int, p_open: float, horizon: int, reps: int, rng=0) -> float:
    """Fraction of replicas with an open path from row 0 to row ``horizon``.

    Site ``(i, t+1)`` is reached through each of ``(i-1, t)``, ``(i, t)`` and
    ``(i+1, t)`` that is reached, independently with probability ``p_open``.
    Replica ``j`` uses stream ``j`` of the master seed ``rng``; an edge is
    open iff its uniform is below ``p_open``, so runs with one seed are
    coupled across ``p_open``.
    """
    if not 0.0 <= p_open <= 1.0:
        raise ValueError("p_open must lie in [0, 1]")
    if L < 1 or horizon < 0 or reps < 1:
        raise ValueError("need L >= 1, horizon >= 0, reps >= 1")
    seed = rng if isinstance(rng, (int, np.integer)) else int(_as_rng(rng).integers(2**63))
    hits = sum(_percolation_once(L, p_open, horizon, replica_rng(seed, j)) for j in range(reps))
    return hits / reps


# --------------------------------------------------------------------------
# path of stars
# --------------------------------------------------------------------------

@dataclass
class PathReport:
    L: int
    k: int
    lam: float
    survival: np.ndarray
    censored: np.ndarray
    horizon: float
    epoch: float
    coupling_hits: int
    coupling_trials: int

    @property
    def censor_fraction(self) -> float:
        return float(self.censored.mean())

    @property
    def median(self) -> float:
        """Median of the censored sample (a lower bound once half the runs are censored)."""
        return float(np.median(np.minimum(self.survival, self.horizon)))

    @property
    def median_resolved(self) -> bool:
        return self.censor_fraction < 0.5

    @property
    def coupling_freq(self) -> float:
        return self.coupling_hits / self.coupling_trials if self.coupling_trials else float("nan")

    @property
    def coupling_ci(self) -> tuple[float, float]:
        return wilson_interval(self.coupling_hits, self.coupling_trials)

    def row(self) -> dict:
        lo, hi = self.coupling_ci
        return {"L": self.L, "k": self.k, "lambda": self.lam, "reps": int(self.survival.size),
                "median": self.median, "mean": float(np.minimum(self.survival, self.horizon).mean()),
                "censored": int(self.censored.sum()), "median_resolved": self.median_resolved,
                "coupling_freq": self.coupling_freq, "coupling_lo": lo, "coupling_hi": hi}


def path_of_stars(L: int, k: int, lam: float, reps: int, horizon: float, rng=0,
                  epoch: float = 1.0, threshold: float | None = None) -> PathReport:
    """Survival of the path of ``L`` stars with ``k`` private leaves each.

    The process starts with every vertex infected and is simulated exactly
    on the lumped state (root state, infected-leaf count) of each star.
    At every multiple of ``epoch`` the indicator "at least ``threshold``
    (default ``lam k / 100``) leaves of star i are infected" is recorded;
    the coupling frequency is the fraction of (i, t) with the indicator on
    for which it is on at t+1 for star i and both path neighbours.
    """
    if L < 1 or k < 0 or reps < 1:
        raise ValueError("need L >= 1, k >= 0, reps >= 1")
    rng = _as_rng(rng)
    thr = lam * k / 100 if threshold is None else threshold
    n_ep = int(math.floor(horizon / epoch))
    ind = np.zeros((reps, n_ep + 1, L), dtype=bool)
    root = np.ones((reps, L), dtype=np.int64)
    leaves = np.full((reps, L), k, dtype=np.int64)
    t = np.zeros(reps)
    next_ep = np.zeros(reps, dtype=np.int64)  # next epoch index to record
    end = np.full(reps, np.inf)
    live = np.arange(reps)
    while live.size:
        r, n = root[live], leaves[live]
        nb = np.zeros_like(r)
        nb[:, 1:] += r[:, :-1]
        nb[:, :-1] += r[:, 1:]
        rates = np.concatenate([r * 1.0, (1 - r) * lam * (n + nb),
                                r * lam * (k - n), n * 1.0], axis=1)
        tot = rates.sum(axis=1)
        dead = tot == 0
        with np.errstate(divide="ignore"):
            t_new = t[live] + rng.exponential(size=live.size) / tot
        t_new[dead] = np.inf
        # record epoch indicators for boundaries passed before the next event
        while True:
            due = (next_ep[live] <= n_ep) & (next_ep[live] * epoch < t_new)
            if not due.any():
                break
            rows = live[due]
            ind[rows, next_ep[rows]] = leaves[rows] >= thr
            next_ep[rows] += 1
        end[live[dead]] = t[live[dead]]
        over = ~dead & (t_new > horizon)
        cont = ~dead & ~over
        t[live] = np.minimum(t_new, horizon)
        idx = live[cont]
        rc = rates[cont]
        u = rng.random(idx.size) * tot[cont]
        ch = np.minimum((np.cumsum(rc, axis=1) <= u[:, None]).sum(axis=1), 4 * L - 1)
        kind, star = ch // L, ch % L
        root[idx, star] += np.where(kind == 1, 1, 0) - np.where(kind == 0, 1, 0)
        leaves[idx, star] += np.where(kind == 2, 1, 0) - np.where(kind == 3, 1, 0)
        live = idx
    censored = ~np.isfinite(end)
    surv = np.where(censored, horizon, end)
    now, nxt = ind[:, :-1, :], ind[:, 1:, :]
    good = nxt.copy()
    good[:, :, 1:] &= nxt[:, :, :-1]
    good[:, :, :-1] &= nxt[:, :, 1:]
    trials = int(now.sum())
    hits = int((now & good).sum())
    return PathReport(L, k, lam, surv, censored, float(horizon), epoch, hits, trials)


# --------------------------------------------------------------------------
# survival-time scaling on random graphs
# --------------------------------------------------------------------------

def max_exp_median(n: int) -> float:
    """Median of the maximum of ``n`` independent Exp(1) variables."""
    return -math.log1p(-(0.5 ** (1.0 / n)))


def max_exp_median_se(n: int, reps: int) -> float:
    """Asymptotic standard error of the sample median of ``reps`` such maxima."""
    m = max_exp_median(n)
    dens = n * math.exp(-m) * (1 - math.exp(-m)) ** (n - 1)
    return 1.0 / (2 * dens * math.sqrt(reps))


def _scaling_rep(n: int, mu: DegreeDistribution, lam: float, horizon: float, seed: int,
                 stream: int) -> tuple[float, bool]:
    rng = replica_rng(seed, stream)
    g = configuration_model(n, mu, rng)
    rep = run_contact(g, lam, range(n), horizon=horizon, rng=rng, record=False).report
    return rep.survival_time, rep.censored


def scaling_sweep(mu: DegreeDistribution, lam: float, n_list, reps: int, rng=0,
                  horizon: float = 1e4, workers: int = 1) -> dict:
    """Survival-time statistics of the all-infected start on configuration graphs.

    Rows with more than half of the runs censored are flagged unusable and
    left out of the regressions of median survival against ``log n``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    seed = rng if isinstance(rng, (int, np.integer)) else int(_as_rng(rng).integers(2**63))
    rows = []
    for j, n in enumerate(n_list):
        jobs = [(int(n), mu, lam, horizon, seed, j * 1_000_000 + i) for i in range(reps)]
        res = _fan_out(_scaling_rep, jobs, workers)
        times = np.array([x[0] for x in res])
        cens = np.array([x[1] for x in res], dtype=bool)
        rows.append({"n": int(n), "reps": reps, "completed": int((~cens).sum()),
                     "censored": int(cens.sum()), "median": float(np.median(times)),
                     "q10": float(np.quantile(times, 0.1)), "q90": float(np.quantile(times, 0.9)),
                     "mean": float(times.mean()), "usable": bool(cens.mean() <= 0.5)})
    use = [r for r in rows if r["usable"]]
    out = {"rows": rows, "slope_loglog": float("nan"), "slope_log": float("nan")}
    if len(use) >= 2:
        x = np.log([r["n"] for r in use])
        y = np.array([r["median"] for r in use])
        out["slope_loglog"] = float(stats.linregress(x, np.log(y)).slope)
        out["slope_log"] = float(stats.linregress(x, y).slope)
    return out


# --------------------------------------------------------------------------
# tail tabulation
# --------------------------------------------------------------------------

TAIL_DEFAULTS = {"xi": {"family": "poisson", "mean": 2.0}, "lambda": 0.05, "depth": 3,
                 "reps": 10000, "kind": "S", "grid": None}


def tail_estimate(config: ExperimentConfig, out_dir=None) -> TailTable:
    """Tail table of recursion values over random GW trees (or the product check).

    ``kind`` is ``S`` (w S), ``M`` (1.5^depth w M_depth) or ``product``
    (the product of envelope-distributed factors, compared to f(3t)/3).
    The offspring law of non-root vertices is the size-biased version of
    ``xi``; the root keeps ``xi``. With ``out_dir`` a CSV and manifest are
    written there.
    """
    p = {**TAIL_DEFAULTS, **config.params}
    reps = int(p["reps"])
    if reps < 1:
        raise ValueError("empty sample budget: reps must be at least 1")
    lam = float(p["lambda"])
    if lam > LAMBDA_MAX:
        raise ValueError(f"lambda={lam} exceeds the guard {LAMBDA_MAX}")
    xi = load_distribution(p["xi"])
    xi_tilde = size_biased(xi)
    profile = make_tail_profile(xi_tilde, lam)
    rng = replica_rng(int(config.seeds[0]), 0)
    kind = p["kind"]
    if kind in ("S", "M"):
        sampler = gw_bound_sampler(xi, xi_tilde, int(p["depth"]), lam, rng, kind)
        table = tail_profile_check(sampler, profile, reps, p["grid"])
    elif kind == "product":
        table = tail_profile_check(product_envelope_sampler(xi_tilde, profile, rng), profile,
                                   reps, p["grid"], strong=True)
    else:
        raise ValueError(f"unknown tail kind {kind!r}")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        man = RunManifest("tail", p, list(config.seeds))
        csv_path = out_dir / "tail.csv"
        write_csv(csv_path, table.rows())
        man.add_output(csv_path)
        man.extra["profile"] = profile.as_dict()
        man.write(out_dir / "manifest.json")
    return table
