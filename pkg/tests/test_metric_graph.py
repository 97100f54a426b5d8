"""Metric graph kernel against networkx and brute force."""
from fractions import Fraction
from itertools import combinations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import model
from hhsmax.metric_graph import (GraphError, MetricGraph, closest_point_projection, distance,
                                 enlargement_check, estimate_delta, fit_unparametrized_qg, geodesic,
                                 gromov_gap, gromov_product, is_quasiconvex, morse_constant_estimate,
                                 neighborhood_C, neighborhood_M, quasiconvexity_constant,
                                 ray_stabilization_constant, retract_ray_to_quasiconvex)
from hhsmax.examples import vertex


def to_nx(g):
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_weighted_edges_from((u, v, float(w)) for u, v, w in g.edges)
    return G


def path_graph(n):
    return MetricGraph(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n):
    return MetricGraph(n, [(i, (i + 1) % n) for i in range(n)])


@st.composite
def connected_graphs(draw, max_n=12):
    n = draw(st.integers(2, max_n))
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return MetricGraph(n, sorted(edges))


@st.composite
def bipartite_graphs(draw, max_n=10):
    n = draw(st.integers(2, max_n))
    parent = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    side = [0]
    for p in parent:
        side.append(1 - side[p])
    edges = {(p, i + 1) for i, p in enumerate(parent)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if side[a] != side[b]}
    return MetricGraph(n, sorted(edges))


# ---------------------------------------------------------------- distances

def test_grid_distance_l1():
    g = model("grid-Z2", 5).graph
    assert distance(g, g.vertex_of("aaa"), g.vertex_of("bbbb")) == 7


def test_free_distance_ab_ba():
    g = model("free-F2", 6).graph
    assert distance(g, g.vertex_of("ab"), g.vertex_of("ba")) == 4


def test_distance_to_self_is_zero(grid6):
    assert distance(grid6.graph, 17, 17) == 0


def test_distance_matrix_matches_networkx(grid6):
    g = grid6.graph
    ref = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
    D = g.distance_matrix()
    assert all(D[u, v] == ref[u][v] for u in range(g.n) for v in range(g.n))


def test_weighted_distances_match_networkx():
    g = MetricGraph(5, [(0, 1, "1/2"), (1, 2, 2), (0, 2, 3), (2, 3, 1), (3, 4, "3/2"), (0, 4, 4)])
    ref = dict(nx.all_pairs_dijkstra_path_length(to_nx(g)))
    for u in range(5):
        for v in range(5):
            assert float(distance(g, u, v)) == pytest.approx(ref[u][v])


def test_unreachable_pair():
    g = MetricGraph(3, [(0, 1)], check_connected=False)
    with pytest.raises(GraphError, match="unreachable"):
        distance(g, 0, 2)


@pytest.mark.parametrize("edges, msg", [([(0, 0)], "self-loop"), ([(0, 6)], "out of range"),
                                        ([(0, 1, 0)], "non-positive"), ([(0, 1), (1, 0)], "duplicate")])
def test_bad_edges(edges, msg):
    with pytest.raises(GraphError, match=msg):
        MetricGraph(6, edges, check_connected=False)


# ---------------------------------------------------------------- geodesics

def test_geodesic_lexmin_staircase(grid6):
    g = grid6.graph
    x, y = g.vertex_of(""), g.vertex_of("aabb")
    paths = [tuple(p) for p in nx.all_shortest_paths(to_nx(g), x, y)]
    assert len(paths) == 6
    gd = geodesic(g, x, y)
    assert gd.vertices == min(paths)
    assert gd.length == 4


def test_geodesic_lexmin_against_networkx_sample(free6, grid6):
    for g in (grid6.graph, model("tree-x-tree", 3).graph):
        G = to_nx(g)
        for x, y in [(0, g.n - 1), (3, g.n // 2), (g.n // 3, 7)]:
            assert geodesic(g, x, y).vertices == min(tuple(p) for p in nx.all_shortest_paths(G, x, y))


def test_tree_geodesic_unique(free6):
    g = free6.graph
    x, y = g.vertex_of("abA"), g.vertex_of("bbA")
    assert list(geodesic(g, x, y).vertices) == nx.shortest_path(to_nx(g), x, y)


def test_trivial_geodesic():
    g = path_graph(3)
    gd = geodesic(g, 1, 1)
    assert gd.vertices == (1,) and gd.length == 0


# ---------------------------------------------------------------- gromov products and delta

def test_gromov_product_examples(grid6, free6):
    g = grid6.graph
    assert gromov_product(g, g.vertex_of("aaaa"), g.vertex_of("bbbb"), 0) == 0
    f = free6.graph
    assert gromov_product(f, f.vertex_of("aaa"), f.vertex_of("aab"), 0) == 2
    assert gromov_product(f, 5, 5, 9) == distance(f, 5, 9)


def test_delta_six_cycle():
    est = estimate_delta(cycle(6))
    assert est.delta == 1 and est.exhaustive and est.triples == 20


@pytest.mark.parametrize("name, radius", [("free-F2", 3), ("free-F2", 4), ("tree-x-tree", 2)])
def test_delta_trees(name, radius):
    g = model(name, radius).graph
    if name == "tree-x-tree":
        g = path_graph(9)
    assert estimate_delta(g).delta == 0


def test_delta_grid_increases():
    vals = [estimate_delta(model("grid-Z2", r).graph).delta for r in (4, 6, 8)]
    assert vals[0] < vals[1] < vals[2]


def test_delta_sampled_on_large_tree():
    g = model("free-F2", 7).graph
    est = estimate_delta(g, sample_budget=200)
    assert est.delta == 0 and not est.exhaustive


def brute_delta(g):
    D = g.distance_matrix()
    best = 0
    for a, b, c in combinations(range(g.n), 3):
        sides = [geodesic(g, a, b).vertices, geodesic(g, a, c).vertices, geodesic(g, b, c).vertices]
        for i in range(3):
            rest = [v for j in range(3) if j != i for v in sides[j]]
            best = max(best, max(min(D[v, w] for w in rest) for v in sides[i]))
    return best


@settings(max_examples=25, deadline=None)
@given(connected_graphs(max_n=9))
def test_delta_exhaustive_matches_brute_force(g):
    assert estimate_delta(g).delta == brute_delta(g)


# ---------------------------------------------------------------- quasiconvexity and projections

def test_diagonal_not_quasiconvex(grid8):
    g = grid8.graph
    Y = [vertex(grid8, (t, t)) for t in range(-4, 5)]
    ok, wit = is_quasiconvex(g, Y, 1)
    assert not ok
    a, b, v = wit
    assert v in geodesic(g, a, b).vertices
    assert g.multi_source_row(Y)[v] > 1


def test_quasiconvex_trivial_cases(free6):
    g = free6.graph
    seg = list(geodesic(g, g.vertex_of("aab"), g.vertex_of("BBa")).vertices)
    assert is_quasiconvex(g, seg, 0) == (True, None)
    assert is_quasiconvex(g, range(g.n), 0) == (True, None)
    assert quasiconvexity_constant(g, seg) == 0


def test_closest_point_projection_grid(grid8):
    g = grid8.graph
    Y = [vertex(grid8, (i, 0)) for i in range(-8, 9)]
    got = closest_point_projection(g, Y, vertex(grid8, (3, 5)))
    assert sorted(got) == sorted(vertex(grid8, (i, 0)) for i in (2, 3, 4))


def test_closest_point_projection_brute_force(free6):
    g = free6.graph
    Y = list(geodesic(g, g.vertex_of("aaa"), g.vertex_of("bbb")).vertices)
    for x in range(0, g.n, 97):
        row = g.dist_row(x)
        m = min(row[y] for y in Y)
        assert sorted(closest_point_projection(g, Y, x)) == sorted(y for y in Y if row[y] <= m + 1)
    assert Y[2] in closest_point_projection(g, Y, Y[2])


# ---------------------------------------------------------------- quasigeodesic fits

def test_fit_geodesic_and_constant(free6):
    g = free6.graph
    path = geodesic(g, g.vertex_of("abab"), g.vertex_of("BB")).vertices
    fit = fit_unparametrized_qg(g, path)
    assert fit.K_off == 0 and fit.K_back == 0
    fit = fit_unparametrized_qg(g, [4, 4, 4])
    assert (fit.K_off, fit.K_back, fit.K_gap) == (0, 0, 0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_fit_out_and_back(k):
    g = path_graph(12)
    s = list(range(0, 6 + k)) + list(range(4 + k, 4, -1)) + list(range(6, 12))
    assert fit_unparametrized_qg(g, s).K_back == k


def test_fit_needs_two_samples():
    with pytest.raises(GraphError):
        fit_unparametrized_qg(path_graph(3), [1])


def test_morse_constant_tree_and_grid():
    assert morse_constant_estimate(model("free-F2", 3).graph, 1, 0) == 0
    f = [morse_constant_estimate(model("free-F2", r).graph, 1, 2) for r in (3, 4)]
    assert max(f) <= 2 and f[0] == f[1]
    z = [morse_constant_estimate(model("grid-Z2", r).graph, 1, 2, sample_budget=4000) for r in (3, 6)]
    assert z[0] < z[1]


# ---------------------------------------------------------------- boundary neighborhoods

def test_neighborhood_M_tree(free6):
    g = free6.graph
    h = g.vertex_of("aaaaaa")
    assert neighborhood_M(g, h, 6) == []
    M4 = set(neighborhood_M(g, h, 4))
    assert M4 == {v for v, w in enumerate(g.labels) if w.startswith("aaaaa")}
    pos = set(neighborhood_M(g, h, 0))
    assert pos == {v for v in range(g.n) if gromov_product(g, h, v, 0) > 0}


def test_neighborhood_C(free6):
    g = free6.graph
    nb = neighborhood_C(g, [0], 1)
    assert sorted(g.labels[v] for v in nb) == sorted(["", "a", "A", "b", "B"])


def test_retract_ray():
    # comb: spine 0..9, tooth i+10 hanging off spine vertex i
    n = 20
    edges = [(i, i + 1) for i in range(9)] + [(i, i + 10) for i in range(10)]
    g = MetricGraph(n, edges)
    spine = list(range(10))
    same = retract_ray_to_quasiconvex(g, spine, spine, 1)
    assert list(same.vertices) == spine and same.additive == 0
    ray = [0, 1, 2, 3, 13]
    got = retract_ray_to_quasiconvex(g, spine, ray, 1)
    assert list(got.vertices) == [0, 1, 2, 3, 3]
    assert got.additive <= 2
    with pytest.raises(GraphError, match="not asymptotic"):
        retract_ray_to_quasiconvex(g, [9], [0, 10], 1)


def test_ray_stabilization_tree_is_zero(free6):
    g = free6.graph
    assert ray_stabilization_constant(g, g.vertex_of("abab")) == 0


def test_enlargement_tree(free6):
    g = free6.graph
    rows = enlargement_check(g, g.vertex_of("abbaab"), 1, range(2, 6))
    assert all(ok for _, ok, _ in rows)


# ---------------------------------------------------------------- io

def test_round_trip(grid6):
    g = grid6.graph
    h = MetricGraph.loads(g.dumps())
    assert h.dumps() == g.dumps()
    assert (h.distance_matrix() == g.distance_matrix()).all()


def test_round_trip_with_cliques(mr_grid6):
    c = mr_grid6.coned
    h = MetricGraph.loads(c.dumps())
    assert h.cliques == c.cliques
    assert (h.distance_matrix() == c.distance_matrix()).all()


# ---------------------------------------------------------------- properties

@settings(max_examples=40, deadline=None)
@given(connected_graphs(), st.data())
def test_metric_axioms(g, data):
    D = g.distance_matrix()
    assert (np.diag(D) == 0).all() and (D == D.T).all()
    off = D + np.eye(g.n, dtype=D.dtype)
    assert (off > 0).all()
    x, y, z = (data.draw(st.integers(0, g.n - 1)) for _ in range(3))
    assert D[x, z] <= D[x, y] + D[y, z]


@settings(max_examples=40, deadline=None)
@given(connected_graphs(), st.data())
def test_gromov_product_bounds(g, data):
    x, y, z = (data.draw(st.integers(0, g.n - 1)) for _ in range(3))
    p = Fraction(gromov_product(g, x, y, z))
    assert 0 <= p <= min(Fraction(distance(g, x, z)), Fraction(distance(g, y, z)))


@settings(max_examples=40, deadline=None)
@given(bipartite_graphs())
def test_gromov_gap_at_most_delta(g):
    gap, _ = gromov_gap(g)
    assert Fraction(gap) <= Fraction(estimate_delta(g).delta)


@settings(max_examples=25, deadline=None)
@given(connected_graphs(max_n=10))
def test_gromov_gap_half_unit_slack(g):
    # odd cycles put half-integer products against vertex-only distances
    gap, _ = gromov_gap(g)
    assert Fraction(gap) <= Fraction(estimate_delta(g).delta) + Fraction(1, 2)


def test_gromov_gap_triangle():
    gap, _ = gromov_gap(cycle(3))
    assert gap == Fraction(1, 2) and estimate_delta(cycle(3)).delta == 0


@settings(max_examples=25, deadline=None)
@given(connected_graphs(max_n=10), st.data())
def test_geodesic_is_shortest(g, data):
    x, y = data.draw(st.integers(0, g.n - 1)), data.draw(st.integers(0, g.n - 1))
    p = geodesic(g, x, y)
    assert p.vertices[0] == x and p.vertices[-1] == y
    assert len(p.vertices) - 1 == distance(g, x, y)
    assert all(g.edge_ticks(a, b) for a, b in zip(p.vertices, p.vertices[1:]))
