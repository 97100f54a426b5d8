"""Scripted corruptions of bundled structures, one per axiom.

Each mutation starts from a valid bundled model and breaks exactly the
property its axiom check looks at (other checks may fail too).
"""
from __future__ import annotations

import numpy as np

from .structure import Domain, HhsStructure


def add_domains(h: HhsStructure, domains, relations, projections, rho_up=None, rho_down=None) -> HhsStructure:
    args = h.constructor_args()
    args["domains"] = list(args["domains"]) + list(domains)
    args["relations"].update(relations)
    args["projections"].update(projections)
    args["rho_up"].update(rho_up or {})
    args["rho_down"].update(rho_down or {})
    return HhsStructure(**args)


def _grid(radius=6):
    from ..models import model_from_name
    return model_from_name("grid-Z2", radius).structure


def _electrified(radius=5):
    from ..models import model_from_name
    return model_from_name("electrified-F2", radius).structure


def _coord(h, i, c):
    """Vertex of the centered path C V_i at coordinate c."""
    return h.graph(i).labels.index(str(c))


def _point():
    from ..models import point_graph
    return point_graph("*")


def _longest_coset(h):
    qs = [i for i in h.active() if h.names[i] != "S"]
    return max(qs, key=lambda i: (h.graph(i).n, -i))


def mutate_projections(h=None):
    """pi_V1(x0) moved to the far negative end of the axis."""
    h = h or _grid()
    args = h.constructor_args()
    p = np.array(args["projections"]["V1"])
    p[h.ambient.basepoint] = _coord(h, "V1", -int(h.radius))
    args["projections"]["V1"] = p
    return HhsStructure(**args)


def mutate_nesting(h=None):
    """rho^Q_S grown past diameter E by adding a far vertex of C S."""
    h = h or _electrified()
    q = _longest_coset(h)
    s = h.index("S")
    coset = h.rho(q, s)
    far = int(np.argmax(h.dm(s)[coset].min(axis=0)))
    args = h.constructor_args()
    args["rho_up"][(h.names[q], "S")] = list(coset) + [far]
    return HhsStructure(**args)


def mutate_orthogonality(h=None):
    """V3 nested in V1 but transverse to V2, although V1 is orthogonal to V2."""
    h = h or _grid()
    n1 = h.graph("V1").n
    return add_domains(
        h, [Domain("V3", _point())],
        {("V3", "V1"): "nested", ("V3", "S"): "nested", ("V3", "V2"): "transverse"},
        {"V3": np.zeros(h.ambient.n, np.int64)},
        {("V3", "V1"): [0], ("V3", "S"): [0], ("V3", "V2"): [0], ("V2", "V3"): [0]},
        {("V3", "V1"): np.zeros(n1, np.int64), ("V3", "S"): [0]},
    )


def mutate_transversality(h=None):
    """A transverse rho set replaced by the whole target coset."""
    h = h or _electrified()
    q = _longest_coset(h)
    other = next(i for i in h.active() if h.trans(i, q))
    args = h.constructor_args()
    args["rho_up"][(h.names[other], h.names[q])] = list(range(h.graph(q).n))
    return HhsStructure(**args)


def mutate_complexity(h=None):
    """A chain P1 < P2 < V1 < S of length four at E = 3."""
    h = h or _grid()
    n1 = h.graph("V1").n
    z = np.zeros(h.ambient.n, np.int64)
    rel = {("P1", "P2"): "nested", ("P1", "V1"): "nested", ("P1", "S"): "nested", ("P1", "V2"): "orthogonal",
           ("P2", "V1"): "nested", ("P2", "S"): "nested", ("P2", "V2"): "orthogonal"}
    up = {(a, b): [0] for (a, b), k in rel.items() if k == "nested"}
    down = {("P1", "P2"): [0], ("P1", "V1"): np.zeros(n1, np.int64), ("P1", "S"): [0],
            ("P2", "V1"): np.zeros(n1, np.int64), ("P2", "S"): [0]}
    return add_domains(h, [Domain("P1", _point()), Domain("P2", _point())], rel, {"P1": z, "P2": z}, up, down)


def mutate_containers(h=None):
    """V3 nested in S, orthogonal to V1 and transverse to V2: no proper container."""
    h = h or _grid()
    return add_domains(
        h, [Domain("V3", _point())],
        {("V3", "S"): "nested", ("V3", "V1"): "orthogonal", ("V3", "V2"): "transverse"},
        {"V3": np.zeros(h.ambient.n, np.int64)},
        {("V3", "S"): [0], ("V3", "V2"): [0], ("V2", "V3"): [0]},
        {("V3", "S"): [0]},
    )


def mutate_uniqueness(h=None):
    """pi_V2 made constant, so the y-axis is invisible to every projection."""
    h = h or _grid()
    args = h.constructor_args()
    args["projections"]["V2"] = np.full(h.ambient.n, _coord(h, "V2", 0), np.int64)
    return HhsStructure(**args)


def mutate_bgi(h=None):
    """rho_Q^S made to alternate between the two ends of Q away from the coset."""
    h = h or _electrified()
    q = h.index("Q0")
    s = h.index("S")
    gq = h.graph(q)
    ends = np.argsort(gq.distance_matrix()[gq.basepoint])[-2:]
    if gq.distance_matrix()[ends[0], ends[1]] <= h.ticks(q, h.E):
        raise ValueError("coset too short for this mutation")
    far = h.dm(s)[h.rho(q, s)].min(axis=0) > h.ticks(s, h.E)
    table = np.array(h.rho_map(q, s))
    ids = np.arange(len(table))
    table[far] = np.where(ids[far] % 2 == 0, ends[0], ends[1])
    args = h.constructor_args()
    args["rho_down"][("Q0", "S")] = table
    return HhsStructure(**args)


def mutate_large_links(h=None, copies=3):
    """Copies of V1, orthogonal to everything else below S."""
    h = h or _grid()
    names = [f"V1c{i}" for i in range(copies)]
    g = h.graph("V1")
    rel, up, down = {}, {}, {}
    for i, nm in enumerate(names):
        rel[(nm, "S")] = "nested"
        up[(nm, "S")] = [0]
        down[(nm, "S")] = [_coord(h, "V1", 0)]
        rel[(nm, "V1")] = "orthogonal"
        rel[(nm, "V2")] = "orthogonal"
        for other in names[:i]:
            rel[(other, nm)] = "orthogonal"
    proj = {nm: np.array(h.proj[h.index("V1")]) for nm in names}
    return add_domains(h, [Domain(nm, g) for nm in names], rel, proj, up, down)


def mutate_consistency(h=None):
    """V1 and V2 made transverse with rho^{V2}_{V1}, rho^{V1}_{V2} at far points."""
    h = h or _grid()
    R = int(h.radius)
    args = h.constructor_args()
    args["relations"][("V1", "V2")] = "transverse"
    args["rho_up"][("V2", "V1")] = [_coord(h, "V1", R)]
    args["rho_up"][("V1", "V2")] = [_coord(h, "V2", R)]
    return HhsStructure(**args)


def mutate_partial_realization(h=None):
    """V3, a copy of the x-axis transverse to V1, whose rho^{V1}_{V3} sits at the far end."""
    h = h or _grid(8)
    R = int(h.radius)
    g = h.graph("V1")
    c0 = _coord(h, "V1", 0)
    return add_domains(
        h, [Domain("V3", g)],
        {("V3", "S"): "nested", ("V3", "V1"): "transverse", ("V3", "V2"): "transverse"},
        {"V3": np.array(h.proj[h.index("V1")])},
        {("V3", "S"): [0], ("V1", "V3"): [_coord(h, "V1", R)], ("V3", "V1"): [c0],
         ("V2", "V3"): [c0], ("V3", "V2"): [c0]},
        {("V3", "S"): [c0]},
    )


MUTATIONS = {
    1: mutate_projections, 2: mutate_nesting, 3: mutate_orthogonality, 4: mutate_transversality,
    5: mutate_complexity, 6: mutate_containers, 7: mutate_uniqueness, 8: mutate_bgi,
    9: mutate_large_links, 10: mutate_consistency, 11: mutate_partial_realization,
}
