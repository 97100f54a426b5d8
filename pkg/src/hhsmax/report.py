"""The common check-report schema.

Every check in the package returns a CheckReport. Reports serialize to
canonical JSON (sorted keys, no whitespace, rationals as "p/q" strings), so a
load/save round trip is byte-stable and merged report files diff cleanly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
SCHEMA = "hhsmax-report/1"


def jsonable(value):
    """Convert numbers, tuples and numpy scalars into canonical JSON values."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, float):
        f = Fraction(value).limit_denominator(10**6)
        return jsonable(f)
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset, np.ndarray)):
        seq = list(value)
        if isinstance(value, (set, frozenset)):
            seq = sorted(seq, key=lambda v: (str(type(v)), v))
        return [jsonable(v) for v in seq]
    return str(value)


def canonical(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n"


@dataclass
class CheckReport:
    check: str
    model: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    verdict: str = PASS
    constants: dict = field(default_factory=dict)
    witness: object = None
    flags: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def fail(self, witness=None, note: str | None = None) -> "CheckReport":
        self.verdict = FAIL
        if witness is not None and self.witness is None:
            self.witness = witness
        if note:
            self.notes.append(note)
        return self

    def record(self, radius, **values) -> None:
        slot = self.constants.setdefault(str(radius), {})
        slot.update(values)

    def to_dict(self) -> dict:
        return jsonable({
            "schema": SCHEMA,
            "check": self.check,
            "model": self.model,
            "params": self.params,
            "verdict": self.verdict,
            "constants": self.constants,
            "witness": self.witness,
            "flags": sorted(set(self.flags)),
            "notes": list(self.notes),
        })

    def dumps(self) -> str:
        return canonical(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "CheckReport":
        if data.get("schema", SCHEMA) != SCHEMA:
            raise ValueError(f"unknown report schema {data.get('schema')!r}")
        if data.get("verdict") not in (PASS, FAIL, SKIPPED):
            raise ValueError("report verdict must be pass, fail or skipped")
        return cls(data["check"], data.get("model", {}), data.get("params", {}),
                   data["verdict"], data.get("constants", {}), data.get("witness"),
                   list(data.get("flags", [])), list(data.get("notes", [])))

    @classmethod
    def loads(cls, text: str) -> "CheckReport":
        return cls.from_dict(json.loads(text))

    def sort_key(self):
        radii = sorted(int(r) for r in self.constants if str(r).lstrip("-").isdigit())
        return (self.check, canonical(self.model), radii[0] if radii else -1, canonical(self.params))


def merge_reports(reports) -> str:
    """Deterministic merged report file."""
    items = sorted(reports, key=lambda r: r.sort_key())
    body = {
        "schema": SCHEMA,
        "reports": [r.to_dict() for r in items],
        "summary": {
            "total": len(items),
            "failed": sum(r.verdict == FAIL for r in items),
            "skipped": sum(r.verdict == SKIPPED for r in items),
        },
    }
    return canonical(body)


def load_merged(text: str) -> list[CheckReport]:
    data = json.loads(text)
    if "reports" in data:
        return [CheckReport.from_dict(d) for d in data["reports"]]
    return [CheckReport.from_dict(data)]
