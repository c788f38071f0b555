import math

import numpy as np
import pytest
from scipy import stats

from contactlab.contact_engine import (HEALTHY, INFECTED, STAR, BallCache,
                                       build_timeline, coupled_starred, dominates,
                                       run_contact, run_decomposed, run_ignored_recoveries,
                                       run_root_added, run_starred, sample_excursions,
                                       sample_rooted_survival)
from contactlab.distributions import point, poisson
from contactlab.graph_gen import Graph, configuration_model, gen_gw_tree, neighborhood_ball


def _single_vertex_tree():
    return gen_gw_tree(point(0), point(0), 0, np.random.default_rng(0))


def _random_graph(n, mean, seed):
    return configuration_model(n, poisson(mean), np.random.default_rng(seed))


# -- timelines ----------------------------------------------------------------

def test_timeline_without_infection_rate_has_only_recoveries():
    g = _random_graph(20, 3.0, 0)
    tl = build_timeline(g, 0.0, 50.0, np.random.default_rng(1))
    assert all(s < 0 for sl in tl.slots for s in sl)


def test_single_vertex_recovery_count():
    tl = build_timeline(Graph(1, []), 0.3, 1e4, np.random.default_rng(2))
    assert abs(len(tl.recovery_times(0)) - 1e4) <= 3 * math.sqrt(1e4)


def test_timeline_gaps_are_exponential():
    g = Graph(2, [(0, 1), (0, 1)])
    tl = build_timeline(g, 0.5, 1e4, np.random.default_rng(3))
    rec = np.diff(tl.recovery_times(0))[:10_000]
    inf = np.diff(tl.infection_times(0, 1))[:10_000]
    assert stats.kstest(rec, "expon").pvalue > 0.001
    assert stats.kstest(inf, "expon", args=(0, 1 / 0.5)).pvalue > 0.001


def test_timeline_memory_guard():
    g = _random_graph(100, 3.0, 4)
    with pytest.raises(MemoryError, match="on-the-fly"):
        build_timeline(g, 0.5, 1e6, np.random.default_rng(5))


# -- plain contact process ----------------------------------------------------

def test_empty_initial_set_dies_at_zero():
    g = _random_graph(10, 2.0, 6)
    run = run_contact(g, 0.5, [], rng=np.random.default_rng(7))
    assert run.report.survival_time == 0.0 and not run.report.censored


def test_isolated_vertex_survival_is_exponential():
    rng = np.random.default_rng(8)
    g = Graph(1, [])
    t = np.array([run_contact(g, 2.0, [0], rng=rng, record=False).report.survival_time
                  for _ in range(10_000)])
    assert abs(t.mean() - 1.0) <= 3 * t.std(ddof=1) / 100


def test_attractiveness_on_shared_timeline():
    rng = np.random.default_rng(9)
    for seed in range(10):
        g = _random_graph(30, 3.0, seed)
        tl = build_timeline(g, 0.3, 200.0, rng)
        small = run_contact(g, 0.3, [0], timeline=tl).trajectory
        big = run_contact(g, 0.3, range(g.n), timeline=tl).trajectory
        assert dominates(big, small)


def test_survival_is_max_over_single_starts():
    rng = np.random.default_rng(10)
    g = _random_graph(30, 3.0, 11)
    tl = build_timeline(g, 0.2, 300.0, rng)
    whole = run_contact(g, 0.2, range(g.n), timeline=tl, record=False).report
    singles = [run_contact(g, 0.2, [v], timeline=tl, record=False).report for v in range(g.n)]
    assert not whole.censored
    assert whole.survival_time == max(r.survival_time for r in singles)


def test_modes_agree_in_law():
    g = Graph(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    rng = np.random.default_rng(12)
    a = [run_contact(g, 0.6, [0], rng=rng, record=False).report.survival_time
         for _ in range(10_000)]
    b = [run_contact(g, 0.6, [0], mode="timeline", horizon=200.0, rng=rng,
                     record=False).report.survival_time for _ in range(10_000)]
    assert stats.ks_2samp(a, b).pvalue > 0.001


def test_trajectory_csv(tmp_path):
    g = _random_graph(10, 2.0, 13)
    run = run_contact(g, 0.5, [0, 1], rng=np.random.default_rng(14))
    run.trajectory.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "time,vertex,event,new_state"
    assert len(lines) == 1 + 2 + len(run.trajectory.events)


# -- ignored recoveries -------------------------------------------------------

def test_no_ignored_intervals_gives_identical_runs():
    g = _random_graph(20, 3.0, 15)
    tl = build_timeline(g, 0.3, 100.0, np.random.default_rng(16))
    res = run_ignored_recoveries(g, 0.3, [0], 0, [], tl)
    assert res.ignored_events == 0
    assert res.reference.events == res.modified.events


def test_always_ignored_vertex_never_recovers():
    g = _random_graph(20, 3.0, 17)
    tl = build_timeline(g, 0.3, 50.0, np.random.default_rng(18))
    res = run_ignored_recoveries(g, 0.3, [0], 0, [(0.0, math.inf)], tl)
    assert all(not (u == 0 and ev == "recover") for _, u, ev, _ in res.modified.events)
    assert res.modified.states_at(49.0)[0] == INFECTED
    assert res.ignored_events > 0


def test_random_intervals_dominate():
    rng = np.random.default_rng(19)
    for i in range(30):
        g = _random_graph(25, 3.0, 100 + i)
        tl = build_timeline(g, 0.3, 100.0, rng)
        a = np.sort(rng.uniform(0, 20, 4))
        v = int(rng.integers(g.n))
        run_ignored_recoveries(g, 0.3, rng.choice(g.n, 3, replace=False), v,
                               [(a[0], a[1]), (a[2], a[3])], tl)


def test_dominates_detects_violation():
    g = Graph(2, [(0, 1)])
    tl = build_timeline(g, 0.5, 50.0, np.random.default_rng(20))
    both = run_contact(g, 0.5, [0, 1], timeline=tl).trajectory
    one = run_contact(g, 0.5, [0], timeline=tl).trajectory
    assert dominates(both, one)
    assert not dominates(one, both)


# -- starred process ----------------------------------------------------------

def test_starred_without_infection_starts_healthy():
    g = _random_graph(20, 3.0, 21)
    run = run_starred(g, 0.0, range(g.n), rng=np.random.default_rng(22))
    assert run.report.survival_time == 0.0
    assert all(s == HEALTHY for s in run.trajectory.initial)


def test_starred_coupling_containment_and_unstar():
    rng = np.random.default_rng(23)
    for i in range(30):
        g = _random_graph(50, 3.0, 200 + i)
        tl = build_timeline(g, 0.2, 300.0, rng)
        c = coupled_starred(g, 0.2, range(g.n), tl)
        assert c.contained and c.unstar_holds
        assert c.R_star <= c.R


def test_star_state_only_in_starred_mode():
    g = _random_graph(20, 3.0, 24)
    run = run_contact(g, 0.5, range(g.n), rng=np.random.default_rng(25))
    assert all(e[3] != STAR for e in run.trajectory.events)


# -- root-added excursions ----------------------------------------------------

@pytest.mark.parametrize("lam", [0.1, 0.5])
def test_single_vertex_excursion_mean(lam):
    s = sample_excursions(_single_vertex_tree(), lam, 100_000, np.random.default_rng(26))
    m, se = s.mean_time()
    assert abs(m - (1 + 1 / (1 + lam))) <= 3 * se


def test_depth_zero_leaf_count_is_one():
    s = sample_excursions(_single_vertex_tree(), 0.3, 1000, np.random.default_rng(27), l=0)
    assert np.all(s.counts == 1)


def test_sharp_dominates_plain():
    rng = np.random.default_rng(28)
    xi = poisson(1.5)
    for _ in range(20):
        t = gen_gw_tree(xi, xi, 3, rng)
        a = sample_excursions(t, 0.2, 3000, rng, variant="plain")
        b = sample_excursions(t, 0.2, 3000, rng, variant="sharp")
        (ma, sa), (mb, sb) = a.mean_time(), b.mean_time()
        assert mb >= ma - 3 * math.hypot(sa, sb)


def test_otimes_needs_a_child():
    with pytest.raises(ValueError):
        run_root_added(_single_vertex_tree(), 0.2, "otimes", rng=np.random.default_rng(0))


def test_root_added_requires_rng_and_variant():
    with pytest.raises(ValueError):
        run_root_added(_single_vertex_tree(), 0.2)
    with pytest.raises(ValueError):
        run_root_added(_single_vertex_tree(), 0.2, "other", rng=np.random.default_rng(0))


def test_censoring_is_flagged():
    t = gen_gw_tree(point(3), point(3), 3, np.random.default_rng(29))
    rep = run_root_added(t, 2.0, horizon=0.5, rng=np.random.default_rng(30))
    assert rep.censored and rep.excursion_time == 0.5


# -- decomposed process -------------------------------------------------------

def test_decomposed_without_infection_spawns_nothing():
    g = _random_graph(200, 3.0, 31)
    rep = run_decomposed(g, 0, 0.0, 2, rng=np.random.default_rng(32))
    assert rep.spawns == 0


def test_decomposed_on_single_ball_matches_restricted_process():
    # a depth-2 binary tree has no vertex at distance 5 from the root
    t = gen_gw_tree(point(2), point(2), 2, np.random.default_rng(0))
    g = t.graph
    rng = np.random.default_rng(33)
    cache = BallCache(g, 5)
    a = np.array([run_decomposed(g, 0, 0.5, 5, rng=rng, cache=cache).R for _ in range(5000)])
    ball = neighborhood_ball(g, 0, 5).subgraph
    b = sample_rooted_survival(ball, 0.5, 5000, rng).times
    assert abs(a.mean() - b.mean()) <= 3 * math.hypot(a.std() / 70.7, b.std() / 70.7)


def test_decomposed_spawn_guard():
    g = gen_gw_tree(point(2), point(2), 4, np.random.default_rng(0)).graph
    rep = run_decomposed(g, 0, 1.0, 1, horizon=5.0, rng=np.random.default_rng(0))
    assert rep.spawns > 5
    with pytest.raises(RuntimeError, match="spawned blocks"):
        run_decomposed(g, 0, 1.0, 1, horizon=5.0, rng=np.random.default_rng(0), spawn_guard=5)
