"""Boundary proxies, basic sets and the transfer experiments."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import maximized, model
from hhsmax import boundary as bd
from hhsmax import examples as ex
from hhsmax.boundary import BoundaryError, BoundaryProxy, BasicSetParams
from hhsmax.metric_graph import geodesic, neighborhood_M

HALF = Fraction(1, 2)


@pytest.fixture(scope="module")
def grid():
    mr = maximized("grid-Z2", 8)
    return mr, ex.grid_boundary(mr)


@pytest.fixture(scope="module")
def elec():
    mr = maximized("electrified-F2", 6)
    return mr, ex.electrified_boundary(mr)


def xy(mr, *c):
    return ex.vertex(mr, c)


# ---------------------------------------------------------------- proxies

def test_proxy_validation_errors(grid):
    mr, _ = grid
    h = mr.source
    hv = h.pi("V1", xy(mr, 8, 0))
    with pytest.raises(BoundaryError, match="empty"):
        bd.make_proxy(h, {})
    with pytest.raises(BoundaryError, match="sum to 1"):
        bd.make_proxy(h, {"V1": (hv, HALF)})
    with pytest.raises(BoundaryError, match="positive"):
        bd.make_proxy(h, {"V1": (hv, 2), "V2": (0, -1)})
    with pytest.raises(BoundaryError, match="unbounded"):
        bd.make_proxy(h, {"S": (0, 1)})
    with pytest.raises(BoundaryError, match="horizon"):
        bd.make_proxy(h, {"V1": (999, 1)})


def test_proxy_not_orthogonal():
    mr = maximized("electrified-F2", 4)
    h = mr.source
    with pytest.raises(BoundaryError, match="orthogonal"):
        bd.make_proxy(h, {"Q0": (0, HALF), "Q1": (0, HALF)})


def test_proxy_dict_round_trip(grid):
    _, inst = grid
    p = inst["proxies"]["p12"]
    assert BoundaryProxy.from_dict(p.to_dict()) == p
    assert p.coef("V1") == HALF and p.coef("S") == 0


# ---------------------------------------------------------------- projections and remoteness

def test_projection_in_support(grid):
    mr, inst = grid
    p1 = inst["proxies"]["p1"]
    assert bd.boundary_projection(mr.source, p1, "V1").tolist() == [p1.horizon("V1")]


def test_projection_undefined_when_orthogonal(grid):
    mr, inst = grid
    with pytest.raises(BoundaryError, match="undefined"):
        bd.boundary_projection(mr.source, inst["proxies"]["p1"], "V2")


def test_projection_rho_case(elec):
    mr, inst = elec
    h = mr.source
    pQ = inst["proxies"]["pQ"]
    got = bd.boundary_projection(h, pQ, "Q1")
    assert got.tolist() == h.rho_up[(h.index("Q0"), h.index("Q1"))].tolist()


def test_projection_zset_matches_brute_force(elec):
    mr, inst = elec
    h = mr.source
    pS = inst["proxies"]["pS"]
    g = h.graph("S")
    rho = h.rho("Q0", "S").tolist()
    sigma = bd.morse_sigma(g)
    lim = math.ceil((Fraction(h.E) + Fraction(sigma)) * g.scale)
    near = g.multi_source_row(rho)
    tail = {v for a in rho for v in geodesic(g, pS.horizon("S"), a).vertices if near[v] >= lim}
    expect = sorted({int(h.rho_map("Q0", "S")[v]) for v in tail})
    assert bd.boundary_projection(h, pS, "Q0").tolist() == expect


def test_remoteness(grid, elec):
    mr, inst = grid
    p1, p12 = inst["proxies"]["p1"], inst["proxies"]["p12"]
    h = mr.source
    p2 = bd.proxy_toward(h, xy(mr, 0, 8), {"V2": 1})
    assert not bd.is_remote(h, p1, p1)
    assert not bd.is_remote(h, p1, p2)
    assert not bd.is_remote(h, p1, p12)
    mre, insE = elec
    assert bd.is_remote(mre.source, insE["proxies"]["pQ"], insE["proxies"]["pS"])


# ---------------------------------------------------------------- basic sets

def test_membership_basepoint_outside(grid):
    mr, inst = grid
    m = bd.basic_set_membership(mr.source, inst["proxies"]["p1"], BasicSetParams(1, HALF), 0)
    assert m.part == bd.OUTSIDE and not m.ok("I1")


def test_membership_axis(grid):
    mr, inst = grid
    h, p1 = mr.source, inst["proxies"]["p1"]
    prm = BasicSetParams(1, Fraction(1, 5))
    assert bd.basic_set_membership(h, p1, prm, xy(mr, 6, 0)).part == bd.INTERIOR
    m = bd.basic_set_membership(h, p1, prm, xy(mr, 0, 6))
    assert m.part == bd.OUTSIDE and not m.ok("I1")


def test_membership_diagonal(grid):
    mr, inst = grid
    m = bd.basic_set_membership(mr.source, inst["proxies"]["p12"], BasicSetParams(1, Fraction(1, 5)), xy(mr, 4, 4))
    assert m.part == bd.INTERIOR


def test_basic_set_params_validation():
    with pytest.raises(BoundaryError):
        BasicSetParams(-1, HALF)
    with pytest.raises(BoundaryError):
        BasicSetParams(1, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 40), st.integers(0, 6), st.sampled_from([Fraction(1, 5), HALF, Fraction(1)]))
def test_membership_part_is_consistent(cand, r, eps):
    mr = maximized("grid-Z2", 6)
    h = mr.source
    p = bd.proxy_toward(h, xy(mr, 6, 0), {"V1": 1})
    m = bd.basic_set_membership(h, p, BasicSetParams(r, eps), cand)
    inside = all(v["ok"] for v in m.conditions.values())
    assert (m.part == bd.INTERIOR) == inside


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6))
def test_M_is_nested(r1, r2):
    g = model("free-F2", 6).graph
    h = g.vertex_of("abaabb")
    lo, hi = min(r1, r2), max(r1, r2)
    assert set(neighborhood_M(g, h, hi)) <= set(neighborhood_M(g, h, lo))


# ---------------------------------------------------------------- phi

def test_phi_identity_on_inner_support(grid):
    mr, inst = grid
    for p in inst["proxies"].values():
        assert bd.phi(mr, p) == p


def test_phi_outer_support(elec):
    mr, inst = elec
    pQ = inst["proxies"]["pQ"]
    pb = bd.phi(mr, pQ)
    assert pb.domains == ("S",) and pb.coef("S") == 1
    assert pb.horizon("S") == ex.vertex(mr, "a" * 6)


@pytest.mark.parametrize("family", ["grid", "elec"])
def test_phi_preserves_support_size(family, grid, elec):
    mr, inst = grid if family == "grid" else elec
    for p in inst["proxies"].values():
        pb = bd.phi(mr, p)
        assert len(pb.support) == len(p.support)
        assert sorted(a for *_, a in pb.support) == sorted(a for *_, a in p.support)


# ---------------------------------------------------------------- transfer constants and neighborhoods

@settings(max_examples=50)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 4), st.integers(1, 4), st.integers(0, 30))
def test_transfer_constants_formula(kappa, B, sigma, E, r):
    c = bd.TransferConstants(E, kappa, B, sigma)
    assert c.C == 2 * kappa + 8 * E + 2 * B + 1
    assert c.R(r) == max(c.r_prime(r), r - 4 * c.C)
    assert c.R(r + 1) >= c.R(r)


def test_transfer_neighborhood_grid(grid):
    mr, inst = grid
    for tc in inst["transfer"]:
        rep = bd.check_transfer_neighborhood(mr, tc.W, tc.horizon, tc.rs)
        assert rep.verdict == "pass", rep.witness
        assert rep.params["C"] == 37


def test_transfer_neighborhood_electrified(elec):
    mr, inst = elec
    (tc,) = inst["transfer"]
    rep = bd.check_transfer_neighborhood(mr, tc.W, tc.horizon, tc.rs)
    assert rep.verdict == "pass", rep.witness


def test_transfer_empty_M_is_vacuous(grid):
    mr, inst = grid
    tc = inst["transfer"][0]
    res = bd.transfer_neighborhood(mr, tc.W, tc.horizon, 50)
    assert len(res.M_tilde) == 0 and res.ok


# ---------------------------------------------------------------- convergence

def test_convergence_grid(grid):
    mr, inst = grid
    for sc in inst["sequences"]:
        if sc.name == "diagonal":
            continue        # desk-scale failure at radius 8, see test_diagonal_perturbation_scale
        rep = bd.convergence_transfer_experiment(mr, sc.proxy, sc.sequence, sc.r, sc.eps, name=sc.name)
        assert rep.verdict == "pass", (sc.name, rep.witness, rep.notes)
        assert rep.constants["8"]["tail_in_S"] == sc.expect_tail


def test_constant_sequence_never_interior(grid):
    mr, inst = grid
    sc = next(s for s in inst["sequences"] if s.name == "constant")
    rep = bd.convergence_transfer_experiment(mr, sc.proxy, sc.sequence, sc.r, sc.eps)
    assert not any(rep.constants["8"]["in_S"])


def test_diagonal_perturbation_scale():
    # at radius 8 the horizon sits only 4 deep on each axis: perturbing by 2 moves the
    # ratio past eps; at radius 16 the same experiment passes
    small = maximized("grid-Z2", 8)
    sc = next(s for s in ex.grid_boundary(small)["sequences"] if s.name == "diagonal")
    rep = bd.convergence_transfer_experiment(small, sc.proxy, sc.sequence, sc.r, sc.eps)
    assert rep.verdict == "fail"
    assert not rep.constants["8"]["perturbation"]["quotient_ok"]
    big = maximized("grid-Z2", 16)
    sc = next(s for s in ex.grid_boundary(big)["sequences"] if s.name == "diagonal")
    assert bd.convergence_transfer_experiment(big, sc.proxy, sc.sequence, sc.r, sc.eps).verdict == "pass"


# ---------------------------------------------------------------- boundary projection transfer

def test_projection_transfer_not_remote_skipped(grid):
    mr, inst = grid
    p = inst["proxies"]["p1"]
    rep = bd.verify_boundary_projection_transfer(mr, p, p)
    assert rep.verdict == "skipped" and "not remote" in rep.notes[0]


def test_projection_transfer_electrified_patterns(elec):
    mr, inst = elec
    verdicts = [bd.verify_boundary_projection_transfer(mr, p, q).verdict for p, q in inst["patterns"]]
    assert verdicts == ["pass", "skipped"]


def test_projection_transfer_flats_sample():
    mr = maximized("tree-of-flats", 5)
    inst = ex.flats_instances(mr)
    reps = [bd.verify_boundary_projection_transfer(mr, p, q, W) for p, q, W in inst[:6]]
    assert all(r.verdict in ("pass", "skipped") for r in reps)
    assert any(r.verdict == "pass" for r in reps)
    for r in reps:
        for c in r.constants.values():
            assert c["measured"] <= c["bound"]


# ---------------------------------------------------------------- classification

@pytest.mark.parametrize("word, big", [("a", ["V1"]), ("ab", ["V1", "V2"])])
def test_classify_grid(word, big):
    m = model("grid-Z2", 8)
    c = bd.classify_element(m, maximized("grid-Z2", 8), word, 4)
    assert c.label == bd.REDUCIBLE and c.big_set == big and c.cross_check


def test_classify_warns_on_truncation():
    m = model("grid-Z2", 6)
    c = bd.classify_element(m, None, "ab", 8)
    assert c.achieved_K == 3 and c.warnings


def test_classify_identity_trivial(grid6):
    c = bd.classify_element(grid6, None, "aA", 3)
    assert c.label == bd.TRIVIAL and c.big_set == []


def test_classify_electrified_and_product():
    c = bd.classify_element(model("electrified-F2", 6), None, "a", 3)
    assert (c.label, c.big_set, c.big_set_T) == (bd.REDUCIBLE, ["Q0"], ["S"])
    assert c.cross_check
    c = bd.classify_element(model("F2xZ", 4), None, "t", 2)
    assert c.label == bd.REDUCIBLE and c.big_set == ["right"]
