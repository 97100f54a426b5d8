"""Report schema, canonical JSON and deterministic merging."""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hhsmax.report import CheckReport, canonical, jsonable, load_merged, merge_reports


def test_jsonable_values():
    assert jsonable(Fraction(3, 2)) == "3/2"
    assert jsonable(Fraction(4, 2)) == 2
    assert jsonable(np.int64(5)) == 5
    assert jsonable(np.bool_(True)) is True
    assert jsonable({1: (1, 2)}) == {"1": [1, 2]}
    assert jsonable({3, 1, 2}) == [1, 2, 3]


def test_canonical_sorted_compact():
    assert canonical({"b": 1, "a": [Fraction(1, 3)]}) == '{"a":["1/3"],"b":1}\n'


def test_fail_keeps_first_witness():
    r = CheckReport("x")
    r.fail({"a": 1}, "first")
    r.fail({"a": 2}, "second")
    assert r.verdict == "fail" and r.witness == {"a": 1} and r.notes == ["first", "second"]


def test_round_trip_byte_stable():
    r = CheckReport("axiom-01-projections", {"family": "grid-Zn"}, {"E": 3})
    r.record(6, delta=Fraction(1, 2), verts=[1, 2])
    r.flags.append("f")
    text = r.dumps()
    assert CheckReport.loads(text).dumps() == text


def test_bad_schema_and_verdict():
    with pytest.raises(ValueError):
        CheckReport.from_dict({"schema": "other/9", "check": "x", "verdict": "pass"})
    with pytest.raises(ValueError):
        CheckReport.from_dict({"check": "x", "verdict": "maybe"})


@given(st.permutations(list(range(6))))
def test_merge_is_order_independent(order):
    reps = []
    for i in range(6):
        r = CheckReport(f"c{i % 3}", {"radius": i}, {"i": i}, verdict="fail" if i == 4 else "pass")
        r.record(i, v=i)
        reps.append(r)
    base = merge_reports(reps)
    assert merge_reports([reps[i] for i in order]) == base
    back = load_merged(base)
    assert merge_reports(back) == base
    assert '"failed":1' in base
