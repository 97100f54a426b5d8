"""Hierarchy path fitting and search."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..metric_graph import fit_unparametrized_qg
from .structure import HhsStructure


@dataclass
class PathFit:
    lam: object
    ambient: object                       # additive defect of the path in X
    per_domain: dict = field(default_factory=dict)   # name -> QgFit

    def as_dict(self):
        return {"lambda": self.lam, "ambient": self.ambient,
                "per_domain": {k: [f.K_off, f.K_back, f.K_gap] for k, f in self.per_domain.items()}}


def ambient_defect(h: HhsStructure, path) -> object:
    """max over i<j of len(path[i..j]) - d_X(p_i, p_j): 0 exactly for geodesics."""
    X = h.ambient
    p = [int(v) for v in path]
    if len(p) < 2:
        return 0
    steps = np.array([X.edge_ticks(a, b) for a, b in zip(p, p[1:])], dtype=np.int64)
    arc = np.concatenate([[0], np.cumsum(steps)])
    D = X.dist_rows(p)[:, p]
    gap = (arc[None, :] - arc[:, None]) - D
    return X.length(int(np.triu(gap).max()))


def _dedupe(seq):
    out = [seq[0]]
    for v in seq[1:]:
        if v != out[-1]:
            out.append(v)
    return out


def hierarchy_path_fit(h: HhsStructure, path) -> PathFit:
    """lambda-hat: worst unparametrized fit over all domains joined with the ambient defect."""
    p = [int(v) for v in path]
    per = {}
    worst = Fraction(0)
    for i in h.active():
        img = _dedupe([int(h.proj[i][v]) for v in p])
        if len(img) < 2:
            continue
        fit = fit_unparametrized_qg(h.domains[i].graph, img)
        per[h.names[i]] = fit
        worst = max(worst, Fraction(fit.max()))
    amb = ambient_defect(h, p)
    worst = max(worst, Fraction(amb))
    lam = worst.numerator if worst.denominator == 1 else worst
    return PathFit(lam, amb, per)


@dataclass
class PathSearch:
    path: list
    lam: object
    ok: bool
    expanded: int


def find_hierarchy_path(h: HhsStructure, x: int, y: int, lam, budget: int = 2_000) -> PathSearch:
    """Depth-first search over geodesics from x to y.

    Successors are tried in order of total remaining projected distance
    (ties by vertex id). A partial path is pruned once some projection moves
    more than lam away from pi_W(y) relative to its best approach so far.
    Failure is a value: the best fit found is returned with ok=False.
    """
    X = h.ambient
    x, y = int(x), int(y)
    if x == y:
        return PathSearch([x], 0, True, 0)
    dx, dy = X.dist_row(x), X.dist_row(y)
    total = dx[y]
    act = h.active()
    to_y = np.stack([h.domains[i].graph.dist_row(h.proj[i][y])[h.proj[i]] for i in act])   # domains x vertices
    lims = np.array([h.ticks(i, lam) for i in act], dtype=np.int64)
    score = to_y.sum(axis=0)
    best = None
    expanded = 0
    stack = [([x], to_y[:, x].copy())]
    while stack and expanded < budget:
        path, closest = stack.pop()
        u = path[-1]
        if u == y:
            fit = hierarchy_path_fit(h, path)
            if best is None or Fraction(fit.lam) < Fraction(best.lam):
                best = PathSearch(path, fit.lam, Fraction(fit.lam) <= Fraction(lam), expanded)
            if best.ok:
                return best
            continue
        expanded += 1
        nb = X.neighbors(u)
        nxt = [int(v) for v in nb if dx[v] == dx[u] + X.edge_ticks(u, int(v)) and dx[v] + dy[v] == total]
        nxt.sort(key=lambda v: (score[v], v), reverse=True)
        for v in nxt:
            if (to_y[:, v] > closest + lims).any():
                continue
            stack.append((path + [v], np.minimum(closest, to_y[:, v])))
    if best is None:
        path = list(X.geodesic(x, y).vertices)
        fit = hierarchy_path_fit(h, path)
        best = PathSearch(path, fit.lam, Fraction(fit.lam) <= Fraction(lam), expanded)
    return best
