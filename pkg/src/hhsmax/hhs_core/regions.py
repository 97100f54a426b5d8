"""Product regions, gates and hierarchical quasiconvexity.

P_W pins the projections to every V transverse to W or properly containing
W within kappa_P of rho^W_V. Slices of P_W are classes of exact coordinate
equality: the f-slice of x fixes pi_V(x) for all V orthogonal to W, the
e-slice fixes pi_V(x) for all V nested in W. Equality (rather than
closeness) makes slices a partition, which the cone-off needs for slice ids.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np

from ..metric_graph import GraphError, quasiconvexity_constant
from ..report import CheckReport
from .structure import HhsStructure, StructureError


class RegionError(ValueError):
    pass


def _labels(cols: list[np.ndarray], n: int) -> np.ndarray:
    if not cols:
        return np.zeros(n, dtype=np.int64)
    stacked = np.stack(cols, axis=1)
    _, inv = np.unique(stacked, axis=0, return_inverse=True)
    return inv.reshape(-1).astype(np.int64)


@dataclass
class ProductRegion:
    W: str
    vertices: np.ndarray      # P_W, sorted
    f_labels: np.ndarray      # slice id per ambient vertex, -1 outside P_W
    e_labels: np.ndarray
    gate_point: int           # gate of the basepoint into P_W
    kappa: object

    def _inside(self, x, y):
        return self.f_labels[x] >= 0 and self.f_labels[y] >= 0

    def f_slice(self, x: int, y: int) -> bool:
        return bool(self._inside(x, y) and self.f_labels[x] == self.f_labels[y])

    def e_slice(self, x: int, y: int) -> bool:
        return bool(self._inside(x, y) and self.e_labels[x] == self.e_labels[y])

    @property
    def F(self) -> np.ndarray:
        return np.flatnonzero(self.f_labels == self.f_labels[self.gate_point])

    @property
    def E(self) -> np.ndarray:
        return np.flatnonzero(self.e_labels == self.e_labels[self.gate_point])

    def f_slices(self) -> dict:
        """slice id -> vertex array, over all parallel copies."""
        ids = self.f_labels[self.vertices]
        return {int(s): self.vertices[ids == s] for s in np.unique(ids)}


def pinning_domains(h: HhsStructure, w: int) -> list[int]:
    return [v for v in h.active() if v != w and (h.trans(v, w) or h.nested(w, v))]


def product_region(h: HhsStructure, W, kappa=None) -> ProductRegion:
    w = h.index(W)
    kappa = h.kappa_p if kappa is None else kappa
    n = h.ambient.n
    inside = np.ones(n, bool)
    for v in pinning_domains(h, w):
        d = h.dm(v)[h.rho(w, v)].min(axis=0)[h.proj[v]]
        inside &= d <= h.ticks(v, kappa)
    P = np.flatnonzero(inside)
    if not len(P):
        raise RegionError("realization failed; raise kappa_P")
    act = h.active()
    f_cols = [h.proj[v] for v in act if h.orth(v, w)]
    e_cols = [h.proj[v] for v in act if h.nested_eq(v, w)]
    f = np.where(inside, _labels(f_cols, n), -1)
    e = np.where(inside, _labels(e_cols, n), -1)
    x0 = h.ambient.basepoint
    g = x0 if inside[x0] else gate(h, P, x0)
    return ProductRegion(h.names[w], P, f, e, int(g), kappa)


# ---------------------------------------------------------------- gates

def _unit(h: HhsStructure) -> int:
    return lcm(*[h.domains[i].graph.scale for i in h.active()])


def gate_costs(h: HhsStructure, Y, xs) -> tuple[np.ndarray, np.ndarray]:
    """Cost matrix (len(xs), len(Y)) of the gate objective, in common ticks."""
    Y = np.asarray(sorted({int(y) for y in Y}), dtype=np.int64)
    if not len(Y):
        raise RegionError("empty subset")
    xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
    unit = _unit(h)
    cost = np.zeros((len(xs), len(Y)), dtype=np.int64)
    for i in h.active():
        P = h.proj[i]
        g = h.domains[i].graph
        piY = np.unique(P[Y])
        if len(piY) == 1:
            continue
        mul = unit // g.scale
        ux, inv = np.unique(P[xs], return_inverse=True)
        to_near = np.empty((len(ux), len(piY)), dtype=np.int64)
        for k, px in enumerate(ux.tolist()):
            row = g.dist_row(px)[piY]
            near = piY[row == row.min()]
            # distance from each pi(y) to the nearest-point set of pi(x)
            to_near[k] = g.multi_source_row(near.tolist())[piY]
        pos = np.searchsorted(piY, P[Y])
        cost += to_near[inv.reshape(-1)][:, pos] * mul
    return cost, Y


def gate(h: HhsStructure, Y, x: int) -> int:
    """argmin over y in Y of sum_W d_W(pi_W(y), nearest points of pi_W(Y) to pi_W(x))."""
    cost, Ys = gate_costs(h, Y, [x])
    return int(Ys[int(np.argmin(cost[0]))])


def gates(h: HhsStructure, Y, xs, chunk: int = 256) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    out = np.empty(len(xs), dtype=np.int64)
    for s in range(0, len(xs), chunk):
        cost, Ys = gate_costs(h, Y, xs[s:s + chunk])
        out[s:s + chunk] = Ys[np.argmin(cost, axis=1)]
    return out


# ---------------------------------------------------------------- HQC

def projection_quasiconvexity(h: HhsStructure, Y) -> dict:
    """Per-domain quasiconvexity constant of pi_W(Y) in C W."""
    Y = np.asarray(sorted({int(y) for y in Y}), dtype=np.int64)
    out = {}
    for i in h.active():
        piY = np.unique(h.proj[i][Y])
        g = h.domains[i].graph
        out[h.names[i]] = 0 if len(piY) <= 1 or len(piY) == g.n else quasiconvexity_constant(g, piY)
    return out


def realization_envelope(h: HhsStructure, Y, xs=None) -> dict:
    """k(r) = max d_X(x, Y) over sampled x with max_W d_W(x, pi_W(Y)) <= r."""
    X = h.ambient
    Y = np.asarray(sorted({int(y) for y in Y}), dtype=np.int64)
    xs = np.arange(X.n) if xs is None else np.asarray(xs, dtype=np.int64)
    dXY = X.multi_source_row(Y)[xs]
    worst = np.zeros(len(xs))
    for i in h.active():
        g = h.domains[i].graph
        piY = np.unique(h.proj[i][Y])
        d = h.dm(i)[piY].min(axis=0)[h.proj[i][xs]] / g.scale
        worst = np.maximum(worst, d)
    env = {}
    rmax = int(np.ceil(worst.max())) if len(worst) else 0
    for r in range(0, rmax + 1):
        sel = worst <= r
        env[r] = X.length(int(dXY[sel].max())) if sel.any() else 0
    return env


def is_hierarchically_quasiconvex(h: HhsStructure, Y, k0=None, samples=None, seed: int = 0,
                                  name: str = "Y") -> CheckReport:
    """Part (1) exactly against k0 (default E); part (2) envelope recorded for ladder comparison."""
    Y = np.asarray(sorted({int(y) for y in Y}), dtype=np.int64)
    if not len(Y):
        raise RegionError("empty subset")
    k0 = h.E if k0 is None else k0
    rep = CheckReport("hqc", dict(h.model), {"subset": name, "k0": k0, "seed": seed})
    per = projection_quasiconvexity(h, Y)
    measured = max(per.values(), default=0)
    xs = None
    if samples is not None and samples < h.ambient.n:
        xs = np.sort(np.random.default_rng(seed).choice(h.ambient.n, size=samples, replace=False))
    env = realization_envelope(h, Y, xs)
    rep.record(h.radius, k0=measured, per_domain=per, envelope={str(r): v for r, v in env.items()})
    if Fraction(measured) > Fraction(k0):
        bad = max(per, key=lambda k: Fraction(per[k]))
        rep.fail({"domain": bad, "constant": per[bad]}, "projection not k0-quasiconvex")
    return rep


def check_properties_of_F(h: HhsStructure, W, kappa=None) -> CheckReport:
    """Projection regimes of F_W: dense below W, bounded orthogonal to W, near rho elsewhere."""
    w = h.index(W)
    reg = product_region(h, w, kappa)
    F, Ev = reg.F, reg.E
    rep = CheckReport("properties-of-F", dict(h.model), {"W": h.names[w], "kappa_P": reg.kappa})
    dense = orth = near = Fraction(0)
    witness = {}
    for v in h.active():
        g = h.domains[v].graph
        img = np.unique(h.proj[v][F])
        if h.nested_eq(v, w):
            val = Fraction(int(h.dm(v)[img].min(axis=0).max()), g.scale)
            if val > dense:
                dense, witness["dense"] = val, h.names[v]
        elif h.orth(v, w):
            val = Fraction(int(h.dm(v)[np.ix_(img, img)].max()), g.scale)
            if val > orth:
                orth, witness["orthogonal"] = val, h.names[v]
        elif (w, v) in h.rho_up:
            rho = h.rho(w, v)
            sub = h.dm(v)[np.ix_(img, rho)]
            val = Fraction(int(max(sub.min(axis=1).max(), sub.min(axis=0).max())), g.scale)
            if val > near:
                near, witness["rho"] = val, h.names[v]
    kF = max(projection_quasiconvexity(h, F).values(), default=0)
    kE = max(projection_quasiconvexity(h, Ev).values(), default=0)
    kappa_hat = max(dense, orth, near, Fraction(kF), Fraction(kE))
    rep.record(h.radius, dense=dense, orthogonal_diameter=orth, rho_hausdorff=near,
               hqc_F=kF, hqc_E=kE, kappa=kappa_hat, F_size=len(F), E_size=len(Ev), P_size=len(reg.vertices))
    if kappa_hat > Fraction(reg.kappa):
        rep.fail(witness, f"achieved kappa {kappa_hat} exceeds kappa_P")
    return rep


__all__ = ["ProductRegion", "RegionError", "product_region", "gate", "gates", "gate_costs",
           "is_hierarchically_quasiconvex", "check_properties_of_F", "projection_quasiconvexity",
           "realization_envelope", "pinning_domains", "GraphError", "StructureError"]
