"""Bundled instances: subsets, proxies, sequences and classification cases."""
import pytest

from conftest import maximized
from hhsmax import examples as ex


@pytest.mark.parametrize("name", sorted(ex.BUNDLED))
def test_ladders_cover_bundled(name):
    for table in (ex.PATH_LADDERS, ex.HQC_LADDERS, ex.GATE_LADDERS):
        lo, hi = table[name]
        assert lo < hi


@pytest.mark.parametrize("name", sorted(ex.BUNDLED))
def test_subsets_are_nonempty_vertex_sets(name):
    mr = maximized(name, ex.HQC_LADDERS[name][0])
    n = mr.source.ambient.n
    subsets = ex.hqc_subsets(name)
    assert any(ok for _, ok in subsets.values()) and not all(ok for _, ok in subsets.values())
    for fn, _ in subsets.values():
        Y = fn(mr)
        assert Y and all(0 <= v < n for v in Y)
    assert set(ex.gate_subsets(name)) == {k for k, (_, ok) in subsets.items() if ok}


def test_vertex_accepts_words_and_coordinates():
    mr = maximized("grid-Z2", 6)
    assert ex.vertex(mr, (2, -1)) == ex.vertex(mr, "aaB") == mr.source.ambient.vertex_of("aaB")
    assert ex.vertex(ex.model_from_name("grid-Z2", 6), (2, -1)) == ex.vertex(mr, "aaB")


def test_grid_instances():
    inst = ex.grid_boundary(maximized("grid-Z2", 8))
    assert sorted(inst["proxies"]) == ["p1", "p12"]
    assert [s.name for s in inst["sequences"]] == ["x-axis", "parabola-capped", "constant", "diagonal"]
    assert [t.W for t in inst["transfer"]] == ["V1", "V2"]
    assert all(len(t.rs) == 10 for t in inst["transfer"])


def test_electrified_instances():
    inst = ex.electrified_boundary(maximized("electrified-F2", 6))
    assert len(inst["patterns"]) == 2
    assert inst["transfer"][0].W == "Q0"


def test_flats_instances_count():
    assert len(ex.flats_instances(maximized("tree-of-flats", 4))) == 30


def test_maximized_ladder():
    mrs = ex.maximized_ladder("grid-Z2", (4, 6))
    assert [m.radius for m in mrs] == [4, 6]
