"""Bundled model families and the instances the checks run on.

The generators live in models; this module fixes which families, radii and
subsets, proxies, sequences and elements the acceptance suite and the CLI use.
Subset builders take a MaximizationResult and return vertex ids, so one
builder serves every radius of a ladder.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .boundary import BoundaryProxy, proxy_toward
from .maximization import MaximizationResult, maximize
from .models import (ALIASES, DEFAULT_E, DEFAULT_KAPPA_P, FAMILIES, Model, ModelSpec, build_model,
                     build_radius_ladder, coordinate_word, element_vertex, model_from_name, orbit)

# name -> radius used for the axiom suite
BUNDLED = {"grid-Z2": 6, "free-F2": 4, "tree-x-tree": 3, "F2xZ": 4, "electrified-F2": 4}
EXTRA = {"tree-of-flats": 4}

# ladders for the cross-radius checks; 12 only where the ball stays small
PATH_LADDERS = {"grid-Z2": (6, 12), "free-F2": (6, 8), "tree-x-tree": (3, 6), "F2xZ": (3, 6),
                "electrified-F2": (4, 6)}
HQC_LADDERS = {"grid-Z2": (6, 12), "free-F2": (4, 6), "tree-x-tree": (3, 5), "F2xZ": (3, 5),
               "electrified-F2": (4, 6)}
GATE_LADDERS = PATH_LADDERS


def vertex(mr_or_model, word) -> int:
    """Vertex of a word (or grid coordinates) in a model or a maximization of it."""
    if isinstance(mr_or_model, Model):
        return element_vertex(mr_or_model, word)
    g = mr_or_model.source.ambient
    if isinstance(word, (tuple, list)):
        word = coordinate_word(word)
    return g.vertex_of(word)


def maximized_ladder(name: str, radii, **params) -> list[MaximizationResult]:
    return [maximize(m.structure) for m in build_radius_ladder(ModelSpec.parse(name, radii[0], **params), radii)]


# ---------------------------------------------------------------- subsets

def _axis(word_pos, word_neg=None):
    def fn(mr):
        R = mr.radius
        out = [vertex(mr, word_pos * i) for i in range(R // len(word_pos) + 1)]
        if word_neg:
            out += [vertex(mr, word_neg * i) for i in range(1, R // len(word_neg) + 1)]
        return out
    return fn


def _grid_line(step):
    def fn(mr):
        R = mr.radius
        k = R // sum(abs(s) for s in step)
        return [vertex(mr, tuple(i * s for s in step)) for i in range(-k, k + 1)]
    return fn


def _two_points(w1, w2):
    def fn(mr):
        R = mr.radius
        return [vertex(mr, w1 * (R // len(w1))), vertex(mr, w2 * (R // len(w2)))]
    return fn


def _point(mr):
    return [mr.source.ambient.basepoint]


def _free_factor(letters):
    def fn(mr):
        labels = mr.source.ambient.labels
        return [v for v, w in enumerate(labels) if set(w) <= set(letters)]
    return fn


def hqc_subsets(name: str) -> dict:
    """name -> (builder, expected HQC verdict)."""
    table = {
        "grid-Z2": {"x-axis": (_grid_line((1, 0)), True), "point": (_point, True),
                    "diagonal": (_grid_line((1, 1)), False), "two-points": (_two_points("a", "A"), False)},
        "free-F2": {"a-axis": (_axis("a", "A"), True), "ab-axis": (_axis("ab", "BA"), True),
                    "two-points": (_two_points("a", "b"), False)},
        "tree-x-tree": {"left-factor": (_free_factor("abc"), True), "point": (_point, True),
                        "two-points": (_two_points("ab", "pq"), False)},
        "F2xZ": {"F2-factor": (_free_factor("aAbB"), True), "t-axis": (_axis("t", "T"), True),
                 "two-points": (_two_points("a", "b"), False)},
        "electrified-F2": {"a-axis": (_axis("a", "A"), True), "point": (_point, True),
                           "two-points": (_two_points("a", "b"), False)},
    }
    return table[name]


def gate_subsets(name: str) -> dict:
    return {k: fn for k, (fn, ok) in hqc_subsets(name).items() if ok}


# ---------------------------------------------------------------- boundary instances

@dataclass
class SequenceCase:
    name: str
    proxy: BoundaryProxy
    sequence: list
    r: int
    eps: Fraction
    expect_tail: bool          # tail inside B^int_{r,eps}(p)


@dataclass
class TransferCase:
    W: str
    horizon: int
    rs: list = field(default_factory=lambda: list(range(10)))


def grid_boundary(mr: MaximizationResult) -> dict:
    """Grid-Z2 (radius 8) proxies, sequences and neighborhood instances."""
    h, R = mr.source, mr.radius
    x = lambda *c: vertex(mr, c)
    p1 = proxy_toward(h, x(R, 0), {"V1": 1})
    p12 = proxy_toward(h, x(R // 2, R // 2), {"V1": Fraction(1, 2), "V2": Fraction(1, 2)})
    half = Fraction(1, 2)
    seqs = [
        SequenceCase("x-axis", p1, [x(n, 0) for n in range(R + 1)], 2, half, True),
        SequenceCase("parabola-capped", p1, [x(n, min(n * n, R - n)) for n in range(R + 1)], 2, half, False),
        SequenceCase("constant", p1, [x(0, 0)] * (R + 1), 2, half, False),
        SequenceCase("diagonal", p12, [x(n, n) for n in range(R // 2 + 1)], 1, half, True),
    ]
    return {"proxies": {"p1": p1, "p12": p12}, "sequences": seqs,
            "transfer": [TransferCase("V1", p1.horizon("V1")), TransferCase("V2", h.pi("V2", x(0, R)))]}


def electrified_boundary(mr: MaximizationResult) -> dict:
    """Electrified-F2 (radius 6): Q0 is the a-axis, removed by the maximization."""
    h, R = mr.source, mr.radius
    v = lambda w: vertex(mr, w)
    pQ = proxy_toward(h, v("a" * R), {"Q0": 1})
    pS = proxy_toward(h, v("b" * R), {"S": 1})
    half = Fraction(1, 2)
    seqs = [SequenceCase("a-power", pQ, [v("a" * n) for n in range(R + 1)], 2, half, True),
            SequenceCase("b-power", pS, [v("b" * n) for n in range(R + 1)], 1, half, True),
            SequenceCase("constant", pQ, [v("")] * (R + 1), 2, half, False)]
    return {"proxies": {"pQ": pQ, "pS": pS}, "sequences": seqs,
            "transfer": [TransferCase("Q0", pQ.horizon("Q0"))],
            "patterns": [(pQ, pS), (pS, pQ)]}


def flats_instances(mr: MaximizationResult) -> list[tuple]:
    """(p, q, W) triples in the tree of flats; p lives on a flat, q on S off it."""
    h, R = mr.source, mr.radius
    v = lambda w: vertex(mr, w)
    ps = [proxy_toward(h, v("a" * R), {"F0a": 1}),
          proxy_toward(h, v("b" * R), {"F0b": 1}),
          proxy_toward(h, v("a" * (R // 2) + "b" * (R - R // 2)), {"F0a": Fraction(1, 2), "F0b": Fraction(1, 2)})]
    qs = [proxy_toward(h, v(w), {"S": 1})
          for w in ("c" * R, "C" * R, "a" + "c" * (R - 1), "B" + "c" * (R - 1), "aa" + "c" * (R - 2))]
    return [(p, q, W) for p in ps for q in qs for W in ("F0a", "F0b")]


# ---------------------------------------------------------------- classification

CLASSIFY_CASES = [
    # family, radii, word, K, expected (label, big set)
    ("grid-Z2", (6, 8), "a", 4, ("reducible", ["V1"])),
    ("grid-Z2", (6, 8), "ab", 4, ("reducible", ["V1", "V2"])),
    ("free-F2", (6, 8), "ab", 4, ("irreducible", ["S"])),
    ("electrified-F2", (6,), "a", 3, ("reducible", ["Q0"])),
    ("F2xZ", (4,), "t", 2, ("reducible", ["right"])),
]


__all__ = ["ALIASES", "BUNDLED", "CLASSIFY_CASES", "DEFAULT_E", "DEFAULT_KAPPA_P", "EXTRA", "FAMILIES",
           "GATE_LADDERS", "HQC_LADDERS", "Model", "ModelSpec", "PATH_LADDERS", "SequenceCase",
           "TransferCase", "build_model", "build_radius_ladder", "coordinate_word", "electrified_boundary",
           "element_vertex", "flats_instances", "gate_subsets", "grid_boundary", "hqc_subsets",
           "maximized_ladder", "model_from_name", "orbit", "vertex"]
