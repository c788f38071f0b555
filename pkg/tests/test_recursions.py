import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contactlab.contact_engine import sample_excursions, sample_rooted_survival
from contactlab.distributions import make_tail_profile, point, poisson
from contactlab.graph_gen import Graph, RootedGraph, ShapeError, gen_gw_tree, gen_gwc
from contactlab.recursions import (envelope_inverse, evaluate, gw_bound_sampler,
                                   m_bound_cyclic, m_bound_tree, product_envelope_sampler,
                                   s_bound_cyclic, s_bound_tree, tail_profile_check)


# -- exact oracle over rationals --------------------------------------------

def _oracle(t: RootedGraph, lam: Fraction, l=None):
    """Direct recursion on the BFS tree with exact arithmetic."""
    kids = t.tree_children()

    def go(v, lv):
        ch = [go(u, None if lv is None else lv - 1) for u in kids[v]]
        a = lam * (len(ch) + 1)
        w = a / (1 + a)
        f = [1 + lam * wc * sc for wc, sc, _ in ch]
        prod = math.prod(f, start=Fraction(1))
        s = 1 / (1 + a) - 1 / a + prod / w
        m = None
        if lv is not None:
            if lv == 0:
                m = Fraction(1)
            elif lv < 0 or not ch:
                m = Fraction(0)
            else:
                tot = sum((wc * mc * prod / fi for (wc, _, mc), fi in zip(ch, f)), Fraction(0))
                m = lam * tot / w
        return w, s, m

    return go(t.root, l)


def _path(n):
    return RootedGraph(Graph(n, [(i, i + 1) for i in range(n - 1)]), 0, "tree")


def _star(k):
    return RootedGraph(Graph(k + 1, [(0, i) for i in range(1, k + 1)]), 0, "tree")


# -- hand-expanded values -------------------------------------------------------

@pytest.mark.parametrize("lam", [0.1, 0.5])
def test_single_vertex(lam):
    assert s_bound_tree(_path(1), lam).root_S == pytest.approx(1 + 1 / (1 + lam), rel=1e-14)


def test_single_vertex_half():
    assert s_bound_tree(_path(1), 0.5).root_S == pytest.approx(5 / 3, rel=1e-14)


def test_star_hand_expansion():
    lam = Fraction(1, 10)
    w_leaf = lam / (1 + lam)
    s_leaf = 1 + 1 / (1 + lam)
    a = 4 * lam
    w = a / (1 + a)
    s = 1 / (1 + a) - 1 / a + (1 + lam * w_leaf * s_leaf) ** 3 / w
    m1 = lam / w * 3 * w_leaf * (1 + lam * w_leaf * s_leaf) ** 2
    r = m_bound_tree(_star(3), 0.1, 1)
    assert r.root_S == pytest.approx(float(s), rel=1e-12)
    assert r.root_M == pytest.approx(float(m1), rel=1e-12)
    assert r.root_w == pytest.approx(float(w), rel=1e-14)


def test_path_two_levels_hand_expansion():
    lam = Fraction(1, 5)
    w_g = lam / (1 + lam)
    w_c = 2 * lam / (1 + 2 * lam)
    w_r = 2 * lam / (1 + 2 * lam)
    m1_c = lam * w_g / w_c
    m2 = lam * w_c * m1_c / w_r
    r = m_bound_tree(_path(3), 0.2, 2)
    assert r.M[1] == pytest.approx(float(m1_c), rel=1e-12)
    assert r.root_M == pytest.approx(float(m2), rel=1e-12)


def test_path_bound_dominates_simulation():
    p = _path(3)
    r = m_bound_tree(p, 0.2, 2)
    s = sample_excursions(p, 0.2, 20_000, np.random.default_rng(0), l=2)
    mc, se_c = s.mean_count()
    mt, se_t = s.mean_time()
    assert mc <= r.root_M + 3 * se_c
    assert mt <= r.root_S + 3 * se_t


def test_level_beyond_depth_is_zero_and_level_zero_is_one():
    assert m_bound_tree(_path(3), 0.2, 5).root_M == 0.0
    assert m_bound_tree(_path(1), 0.2, 0).root_M == 1.0
    assert m_bound_tree(_path(4), 0.2, 0).root_M == 1.0


@pytest.mark.parametrize("seed", range(10))
def test_tree_recursion_matches_exact_oracle(seed):
    rng = np.random.default_rng(seed)
    t = gen_gw_tree(poisson(2.0), poisson(2.0), 3, rng)
    lam = Fraction(1, 20)
    w, s, m = _oracle(t, lam, 2)
    r = m_bound_tree(t, 0.05, 2)
    assert r.root_S == pytest.approx(float(s), rel=1e-12)
    assert r.root_w == pytest.approx(float(w), rel=1e-14)
    assert r.root_M == pytest.approx(float(m), rel=1e-12, abs=1e-300)


# -- cyclic shapes --------------------------------------------------------------

def test_gwc1_single_vertex_cycle_is_the_tree_recursion():
    rng = np.random.default_rng(1)
    for _ in range(10):
        h = gen_gwc(1, poisson(2.0), 1, 3, rng)
        a, b = s_bound_cyclic(h, 0.1), s_bound_tree(h, 0.1)
        assert a.root_S == pytest.approx(b.root_S, rel=1e-12)
        a, b = m_bound_cyclic(h, 0.1, 2), m_bound_tree(h, 0.1, 2)
        assert a.root_M == pytest.approx(b.root_M, rel=1e-12, abs=1e-300)


def test_gwc2_triangle_hand_expansion():
    lam = 0.1
    h = gen_gwc(2, point(0), 3, 2, np.random.default_rng(0))
    x = 2 * lam
    c = (2 * x + x * x) / (1 + x) ** 2
    y = 4 * c + 16 * lam * c
    w = 2 * (2 * lam / (1 + 2 * lam))
    r = s_bound_cyclic(h, lam)
    assert r.ring_Y[0] == pytest.approx(y, rel=1e-12)
    assert r.root_S == pytest.approx(y / w, rel=1e-12)


def test_cycle_top_needs_level():
    h = gen_gwc(1, point(1), 3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        m_bound_cyclic(h, 0.1, 0)


@pytest.mark.parametrize("kind", [1, 2])
def test_cyclic_bound_dominates_simulation(kind):
    rng = np.random.default_rng(10 + kind)
    for _ in range(3):
        h = gen_gwc(kind, poisson(1.5), int(rng.integers(3, 5)), 2, rng)
        r = m_bound_cyclic(h, 0.05, 2)
        s = sample_excursions(h, 0.05, 4000, rng, l=2)
        mt, se_t = s.mean_time()
        mc, se_c = s.mean_count()
        assert mt <= r.root_S + 3 * se_t
        assert mc <= r.root_M + 3 * se_c


def test_survival_at_most_twice_excursion_bound():
    rng = np.random.default_rng(2)
    for _ in range(5):
        t = gen_gw_tree(point(2), poisson(2.0), 3, rng)
        r = s_bound_tree(t, 0.05)
        m, se = sample_rooted_survival(t, 0.05, 4000, rng).mean_time()
        assert m <= 2 * r.root_S + 3 * se


# -- invariants -----------------------------------------------------------------

@given(st.integers(0, 10_000), st.floats(0.005, 0.15), st.floats(1.05, 2.0))
@settings(max_examples=40, deadline=None)
def test_weighted_bound_increases_in_lambda(seed, lam, factor):
    t = gen_gw_tree(poisson(2.0), poisson(2.0), 3, np.random.default_rng(seed))
    lo, hi = m_bound_tree(t, lam, 3), m_bound_tree(t, lam * factor, 3)
    assert lo.root_w * lo.root_S <= hi.root_w * hi.root_S * (1 + 1e-12)
    assert lo.root_w * lo.root_M <= hi.root_w * hi.root_M * (1 + 1e-12)
    assert lo.root_S >= 1.0


def test_unweighted_single_vertex_bound_decreases_in_lambda():
    # S alone is not monotone: 1 + 1/(1+lam) falls as lam grows
    a, b = s_bound_tree(_path(1), 0.1).root_S, s_bound_tree(_path(1), 0.2).root_S
    assert a > b


def test_shape_and_argument_errors():
    h = gen_gwc(1, point(1), 3, 2, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        s_bound_tree(h, 0.1)
    with pytest.raises(ShapeError):
        s_bound_cyclic(gen_gw_tree(point(1), point(1), 2, np.random.default_rng(0)), 0.1)
    with pytest.raises(ValueError):
        m_bound_tree(_path(2), 0.1, -1)
    with pytest.raises(ValueError):
        evaluate(_path(2), 0.0)


def test_json_round_trip():
    r = m_bound_tree(_star(3), 0.1, 1)
    back = json.loads(json.dumps(r.to_json()))
    assert back["S"]["0"] == r.root_S and back["M"]["0"] == r.root_M
    assert back["lambda"] == 0.1 and back["l"] == 1


# -- tail diagnostics ------------------------------------------------------------

def test_tail_table_point_zero_atom_below_grid():
    lam = 0.1
    prof = make_tail_profile(point(0), lam)
    value = lam / (1 + lam) * (1 + 1 / (1 + lam))
    sampler = gw_bound_sampler(point(0), point(0), 0, lam, np.random.default_rng(0))
    assert next(sampler)[1] == pytest.approx(value, rel=1e-14)
    # the single atom sits below A lam, so no grid point is ever exceeded
    assert value < prof.t_min
    tab = tail_profile_check(sampler, prof, 50)
    assert not tab.counts.any() and not tab.ratio.any()


def test_tail_counts_nonincreasing():
    prof = make_tail_profile(poisson(2.0), 0.1)
    sampler = gw_bound_sampler(poisson(2.0), poisson(2.0), 3, 0.1, np.random.default_rng(1))
    tab = tail_profile_check(sampler, prof, 500)
    assert np.all(np.diff(tab.counts) <= 0)
    assert len(tab.rows()) == tab.grid.size
    with pytest.raises(ValueError):
        tail_profile_check(sampler, prof, 0)


def test_envelope_inverse():
    prof = make_tail_profile(point(1), 0.1)
    u = prof.f(prof.t_min) * np.array([1.0, 0.5, 1e-3, 1e-8])
    t = envelope_inverse(prof, u)
    assert np.all(t >= prof.t_min)
    assert np.all(prof.f(t) <= u * (1 + 1e-9))
    # minimality: just below the answer the envelope is still above u
    inner = t[1:] * (1 - 1e-6)
    assert np.all(prof.f(inner) > u[1:] * (1 - 1e-6))


def test_product_sampler_single_factor_law():
    # with D = 1 the sample is lam X with P(X >= t) = f(t) above t_min
    prof = make_tail_profile(point(1), 0.1)
    it = product_envelope_sampler(point(1), prof, np.random.default_rng(3))
    x = np.array([next(it) for _ in range(20_000)]) / 0.1
    assert np.all(x >= prof.t_min * (1 - 1e-8))
    for t in (prof.t_min, prof.t_min * 1.5):
        f = float(prof.f(t))
        freq = np.mean(x >= t)
        assert abs(freq - f) <= 3 * math.sqrt(f * (1 - f) / x.size) + 1e-12
