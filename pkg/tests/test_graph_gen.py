from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from contactlab.distributions import point, poisson
from contactlab.graph_gen import (Graph, MultiCycleError, RootedGraph, ShapeError,
                                  bfs_distances, configuration_model, cutoff_line_match,
                                  cutoff_line_pairs, find_long_path, gen_egw, gen_gw_tree,
                                  gen_gwc, gw_level_sizes, neighborhood_ball, read_graph,
                                  star_of_stars, validate_long_path, validate_shape)


def _edge_key(g: Graph):
    return tuple(sorted(tuple(sorted(e)) for e in g.edges.tolist()))


edge_lists = st.integers(1, 12).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                             max_size=30)))


@given(edge_lists)
def test_adjacency_symmetric_as_multiset(data):
    n, edges = data
    g = Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
    assert g.degree_seq.sum() % 2 == 0
    for v in range(n):
        assert g.degree(v) == len(g.neighbors(v))
        cnt = Counter(g.neighbors(v).tolist())
        for u, c in cnt.items():
            if u != v:
                assert Counter(g.neighbors(u).tolist())[v] == c


def test_write_read_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    g = configuration_model(50, poisson(3.0), rng)
    g.write(tmp_path / "g.txt")
    h = read_graph(tmp_path / "g.txt")
    assert h.n == g.n and np.array_equal(h.edges, g.edges)
    rg = gen_gwc(1, poisson(1.5), 4, 2, rng)
    rg.write(tmp_path / "r.txt")
    back = read_graph(tmp_path / "r.txt")
    assert isinstance(back, RootedGraph)
    assert (back.root, back.shape, back.cycles, back.params) == (rg.root, rg.shape, rg.cycles, rg.params)
    assert np.array_equal(back.graph.edges, rg.graph.edges)


# -- configuration model ---------------------------------------------------

def test_configuration_model_two_vertices():
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert _edge_key(configuration_model(2, point(1), rng)) == ((0, 1),)


def test_configuration_model_three_regular_pairings():
    # six half-edges, 15 pairings: triangle (8), loop at v plus double edge (2 each), three loops (1)
    rng = np.random.default_rng(2)
    n = 10_000
    counts = Counter(_edge_key(configuration_model(3, point(2), rng)) for _ in range(n))
    expected = {((0, 1), (0, 2), (1, 2)): 8,
                ((0, 0), (1, 2), (1, 2)): 2, ((0, 1), (0, 1), (2, 2)): 2,
                ((0, 2), (0, 2), (1, 1)): 2, ((0, 0), (1, 1), (2, 2)): 1}
    assert set(counts) == set(expected)
    for key, mult in expected.items():
        p = mult / 15
        assert abs(counts[key] / n - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_configuration_model_mean_degree_and_parity():
    rng = np.random.default_rng(3)
    g = configuration_model(10_000, poisson(4.0), rng)
    deg = g.degree_seq
    assert deg.sum() % 2 == 0
    assert abs(deg.mean() - 4.0) <= 3 * np.sqrt(4.0 / deg.size)
    assert g.m == deg.sum() // 2


def test_configuration_model_odd_point_rejected():
    with pytest.raises(ValueError):
        configuration_model(3, point(1), np.random.default_rng(0))
    assert configuration_model(3, point(0), np.random.default_rng(0)).m == 0


# -- cut-off line matching --------------------------------------------------

def test_cutoff_two_half_edges():
    assert _edge_key(cutoff_line_match([1, 1], np.random.default_rng(0))) == ((0, 1),)


def test_cutoff_three_matchings_uniform():
    rng = np.random.default_rng(4)
    n = 30_000
    counts = Counter(frozenset(frozenset(p) for p in cutoff_line_pairs([1, 1, 2], rng))
                     for _ in range(n))
    assert len(counts) == 3
    obs = np.array(list(counts.values()))
    assert np.all(np.abs(obs / n - 1 / 3) <= 3 * np.sqrt(2 / 9 / n))
    assert stats.chisquare(obs).pvalue > 0.001


def test_cutoff_matches_configuration_pairing_law():
    rng = np.random.default_rng(5)
    n = 10_000
    a = Counter(_edge_key(cutoff_line_match([2, 2, 2], rng)) for _ in range(n))
    b = Counter(_edge_key(configuration_model(3, point(2), rng)) for _ in range(n))
    for key in set(a) | set(b):
        p = (a[key] + b[key]) / (2 * n)
        assert abs(a[key] - b[key]) / n <= 3 * np.sqrt(2 * p * (1 - p) / n) + 1e-12


def test_cutoff_odd_sum_rejected():
    with pytest.raises(ValueError):
        cutoff_line_match([1, 2], np.random.default_rng(0))


# -- Galton-Watson families ---------------------------------------------------

def test_gw_tree_small_cases():
    rng = np.random.default_rng(6)
    assert gen_gw_tree(poisson(2.0), poisson(2.0), 0, rng).n == 1
    t = gen_gw_tree(point(2), point(2), 3, rng)
    assert t.n == 15
    assert np.bincount(t.depth).tolist() == [1, 2, 4, 8]
    validate_shape(t)


def test_gw_level_means():
    xi = poisson(2.0)
    z = gw_level_sizes(xi, xi, 8, 10_000, np.random.default_rng(7))
    for s in range(9):
        se = z[:, s].std(ddof=1) / np.sqrt(z.shape[0])
        assert abs(z[:, s].mean() - 2.0**s) <= 3 * se + 1e-12


def test_gw_level_sizes_agree_with_trees():
    xi = poisson(1.5)
    rng = np.random.default_rng(8)
    trees = np.array([np.bincount(gen_gw_tree(xi, xi, 4, rng).depth, minlength=5)[:5]
                      for _ in range(3000)])
    z = gw_level_sizes(xi, xi, 4, 3000, np.random.default_rng(9))
    for s in range(5):
        assert stats.ks_2samp(trees[:, s], z[:, s]).pvalue > 0.001


def test_gwc_shapes():
    rng = np.random.default_rng(10)
    t = gen_gwc(1, poisson(2.0), 1, 3, rng)
    assert t.shape == "tree"
    h = gen_gwc(2, point(0), 3, 4, rng)
    assert h.n == 3 and _edge_key(h.graph) == ((0, 1), (0, 2), (1, 2))
    h = gen_gwc(1, point(1), 4, 2, rng)
    assert h.n == 12
    validate_shape(h)
    for kind in (1, 2):
        for _ in range(50):
            validate_shape(gen_gwc(kind, poisson(1.5), int(rng.integers(2, 6)), 2, rng))


def test_gwc2_bare_root():
    h = gen_gwc(2, poisson(3.0), 4, 2, np.random.default_rng(11))
    assert h.graph.degree(0) == 2


def test_egw_hand_instance():
    h = gen_egw(point(1), point(1), 1, 2, 2, np.random.default_rng(12))
    # path 0-1-2, 2-cycle {1, 3}, and 3 carries one child
    assert h.n == 5 and h.graph.m == 5
    assert h.cycles == ((1, 3),)
    validate_shape(h)


def test_egw_h0_puts_the_root_on_a_cycle():
    h = gen_egw(poisson(2.0), poisson(2.0), 0, 3, 2, np.random.default_rng(13))
    assert h.cycles[0][0] == 0 and len(h.cycles) == 1


def test_egw_cycles_structural_scan():
    rng = np.random.default_rng(14)
    xi = poisson(1.5)
    for _ in range(1000):
        h = gen_egw(xi, xi, 1, 3, 3, rng)
        validate_shape(h)
        for c in h.cycles:
            assert len(c) == 3 and min(h.depth[list(c)]) == 1


def test_egw_infeasible_conditioning():
    with pytest.raises(RuntimeError):
        gen_egw(point(0), point(0), 1, 3, 2, np.random.default_rng(0), attempts=10)


def test_validate_shape_catches_mismatch():
    g = Graph(3, [(0, 1), (1, 2), (2, 0)])
    with pytest.raises(ShapeError):
        validate_shape(RootedGraph(g, 0, "tree"))


# -- balls ------------------------------------------------------------------

def test_ball_on_tree():
    t = gen_gw_tree(point(2), point(2), 4, np.random.default_rng(0)).graph
    b = neighborhood_ball(t, 0, 2)
    assert b.cycle is None
    d = bfs_distances(t, [0])
    assert b.vertices == set(np.nonzero((d >= 0) & (d <= 2))[0].tolist())
    assert set(b.global_leaves().tolist()) == set(np.nonzero(d == 2)[0].tolist())


def test_ball_on_six_cycle():
    g = Graph(6, [(i, (i + 1) % 6) for i in range(6)])
    # the induced 2-neighbourhood of a 6-cycle is a path: no cycle inside
    b = neighborhood_ball(g, 0, 2)
    assert b.cycle is None and b.vertices == {0, 1, 2, 4, 5}
    assert set(b.global_leaves().tolist()) == {2, 4}
    b = neighborhood_ball(g, 0, 3)
    assert b.h == 0 and sorted(b.cycle) == list(range(6))
    assert b.vertices == set(range(6))


def test_ball_multicycle_error():
    g = Graph(4, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 1)])
    with pytest.raises(MultiCycleError):
        neighborhood_ball(g, 0, 2)


def test_ball_containment_in_extended_balls():
    rng = np.random.default_rng(15)
    checked = 0
    while checked < 3:
        g = configuration_model(500, poisson(1.5), rng)
        for v in rng.permutation(g.n)[:200].tolist():
            try:
                b = neighborhood_ball(g, v, 1)
            except MultiCycleError:
                continue
            if b.cycle is None:
                continue
            ok = True
            for u in b.vertices:
                try:
                    big = neighborhood_ball(g, u, 1, extended=True)
                except MultiCycleError:
                    ok = False
                    break
                assert b.vertices <= big.vertices
            checked += ok
            if checked >= 3:
                break
    assert checked >= 3


# -- long paths ---------------------------------------------------------------

def test_long_path_impossible_on_bare_path():
    g = Graph(10, [(i, i + 1) for i in range(9)])
    assert find_long_path(g, 3, 10, rounds=200, rng=np.random.default_rng(0)) is None


def test_long_path_planted_star_of_stars():
    g = star_of_stars(5, 2)
    p = find_long_path(g, 4, 5, rounds=1000, rng=np.random.default_rng(1))
    assert p is not None and len(p.vertices) == 5
    assert validate_long_path(g, p)


def test_validator_rejects_shared_private_neighbours():
    from contactlab.graph_gen import LongPath
    g = Graph(4, [(0, 1), (0, 2), (1, 2), (1, 3)])
    assert not validate_long_path(g, LongPath((0, 1), ((2,), (2,)), 3))
    assert validate_long_path(g, LongPath((0, 1), ((2,), (3,)), 3))
