"""Finite-scale boundary calculus.

A boundary point is stood in for by a BoundaryProxy: a pairwise orthogonal
support of unbounded domains, each with a horizon vertex in C W and a rational
coefficient. Neighborhoods M(r; p_W) are read off Gromov products with the
horizon vertex, based at pi_W(x0).

The Z-set of a boundary projection is realized by geodesics instead of all
(1,20E)-quasigeodesics: lex-least geodesics from every point of rho^U_W to the
horizon, kept beyond distance E + sigma, where sigma is the measured delta of
C W. Ratio conditions are evaluated in exact rational arithmetic.
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .hhs_core.regions import product_region
from .hhs_core.structure import HhsStructure, StructureError
from .maximization import MaximizationResult, bounded_across, maximize
from .metric_graph import (MetricGraph, doubled_products, estimate_delta, fit_unparametrized_qg,
                           neighborhood_C, ray_stabilization_constant)
from .models import Model, orbit
from .report import SKIPPED, CheckReport

REMOTE, NON_REMOTE, INTERIOR, OUTSIDE = "remote", "non-remote", "interior", "outside"
TRIVIAL, REDUCIBLE, IRREDUCIBLE = "finite-scale-trivial", "reducible", "irreducible"


class BoundaryError(ValueError):
    pass


# ---------------------------------------------------------------- proxies

@dataclass(frozen=True)
class BoundaryProxy:
    support: tuple            # ((W, horizon vertex of C W, Fraction), ...) sorted by W

    @classmethod
    def of(cls, items) -> "BoundaryProxy":
        """items: {W: (horizon, coefficient)} or an iterable of triples."""
        if isinstance(items, dict):
            items = [(W, hv, a) for W, (hv, a) in items.items()]
        sup = tuple(sorted((str(W), int(hv), Fraction(a)) for W, hv, a in items))
        return cls(sup)

    @property
    def domains(self) -> tuple:
        return tuple(W for W, _, _ in self.support)

    def coef(self, W) -> Fraction:
        for V, _, a in self.support:
            if V == W:
                return a
        return Fraction(0)

    def horizon(self, W) -> int:
        for V, hv, _ in self.support:
            if V == W:
                return hv
        raise BoundaryError(f"{W} not in the support")

    def to_dict(self) -> dict:
        return {"support": [{"domain": W, "horizon": hv, "coefficient": a} for W, hv, a in self.support]}

    @classmethod
    def from_dict(cls, data: dict) -> "BoundaryProxy":
        return cls.of([(d["domain"], d["horizon"], Fraction(str(d["coefficient"]))) for d in data["support"]])


def validate_proxy(h: HhsStructure, p: BoundaryProxy) -> BoundaryProxy:
    if not p.support:
        raise BoundaryError("proxy support: empty")
    if len(set(p.domains)) != len(p.domains):
        raise BoundaryError("proxy support: repeated domain")
    idx = [h.index(W) for W in p.domains]
    for (i, a), (j, b) in combinations(zip(idx, p.domains), 2):
        if not h.orth(i, j):
            raise BoundaryError(f"proxy support pairwise orthogonal: {a} and {b} are not orthogonal")
    for i, (W, hv, a) in zip(idx, p.support):
        if not h.unbounded(i):
            raise BoundaryError(f"proxy support unbounded: C {W} has diameter below D_inf")
        if a <= 0:
            raise BoundaryError(f"proxy coefficients positive: a_{W} = {a}")
        if not 0 <= hv < h.domains[i].graph.n:
            raise BoundaryError(f"proxy horizon: vertex {hv} not in C {W}")
    if sum(a for _, _, a in p.support) != 1:
        raise BoundaryError("proxy coefficients sum to 1")
    return p


def make_proxy(h: HhsStructure, items, validate: bool = True) -> BoundaryProxy:
    p = BoundaryProxy.of(items)
    return validate_proxy(h, p) if validate else p


def proxy_toward(h: HhsStructure, x: int, weights: dict) -> BoundaryProxy:
    """Proxy whose horizon in each support domain W is pi_W(x)."""
    return make_proxy(h, {W: (h.pi(W, x), a) for W, a in weights.items()})


def horizon_radius(h: HhsStructure, p: BoundaryProxy) -> dict:
    x0 = h.ambient.basepoint
    return {W: h.length(W, int(h.graph(W).dist_row(h.pi(W, x0))[hv])) for W, hv, _ in p.support}


def perp_of(h: HhsStructure, names) -> list[int]:
    """supp^perp: active domains orthogonal to every listed domain."""
    idx = [h.index(W) for W in names]
    return [t for t in h.active() if all(h.orth(t, i) for i in idx)]


# ---------------------------------------------------------------- products and sigma

def _products2(h: HhsStructure, W, horizon: int) -> np.ndarray:
    """2<horizon, v>_{pi_W(x0)} in ticks for every v in C W."""
    w = h.index(W)
    return doubled_products(h.domains[w].graph, horizon, h.pi(w, h.ambient.basepoint))


def _in_M(g: MetricGraph, prod2, r) -> np.ndarray:
    return prod2 > Fraction(r) * 2 * g.scale


_SIGMA = weakref.WeakKeyDictionary()


def morse_sigma(g: MetricGraph, budget: int = 50_000):
    """Measured delta of g, used as the Morse constant for geodesic Z-sets."""
    hit = _SIGMA.get(g)
    if hit is None:
        hit = _SIGMA[g] = estimate_delta(g, budget, seed=0).delta
    return hit


# ---------------------------------------------------------------- projections

def boundary_projection(h: HhsStructure, q: BoundaryProxy, U, sigma=None) -> np.ndarray:
    u = h.index(U)
    sup = [h.index(W) for W in q.domains]
    if all(h.orth(u, w) for w in sup):
        raise BoundaryError(f"projection undefined: {h.names[u]} orthogonal to the support")
    if u in sup:
        return np.array([q.horizon(h.names[u])], dtype=np.int64)
    V = [w for w in sup if h.trans(w, u) or h.nested(w, u)]
    if V:
        return np.unique(np.concatenate([h.rho(w, u) for w in V]))
    w = next(w for w in sup if h.nested(u, w))
    return rho_down_image(h, u, w, z_set(h, w, u, q.horizon(h.names[w]), sigma))


def z_set(h: HhsStructure, w: int, u: int, horizon: int, sigma=None) -> np.ndarray:
    """Points of geodesics from rho^u_w to the horizon at distance >= E + sigma from rho^u_w."""
    g = h.domains[w].graph
    sigma = morse_sigma(g) if sigma is None else sigma
    rho = h.rho(u, w)
    parent = g.geodesic_tree(horizon)[0]
    on = np.zeros(g.n, bool)
    for a in rho.tolist():
        v = a
        while not on[v]:
            on[v] = True
            if v == horizon:
                break
            v = int(parent[v])
    far = g.multi_source_row(rho.tolist()) >= math.ceil((Fraction(h.E) + Fraction(sigma)) * g.scale)
    return np.flatnonzero(on & far)


def rho_down_image(h: HhsStructure, u: int, w: int, Z) -> np.ndarray:
    if not len(Z):
        return np.zeros(0, dtype=np.int64)
    return np.unique(h.rho_map(u, w)[np.asarray(Z, dtype=np.int64)])


def _dist_from_base(h: HhsStructure, W, S) -> Fraction | None:
    """d_W(x0, S) with the min convention; None for an empty set."""
    S = np.asarray(S, dtype=np.int64)
    if not len(S):
        return None
    w = h.index(W)
    row = h.domains[w].graph.dist_row(h.pi(w, h.ambient.basepoint))
    return Fraction(int(row[S].min()), h.domains[w].graph.scale)


# ---------------------------------------------------------------- remoteness and basic sets

def is_remote(h: HhsStructure, p: BoundaryProxy, q: BoundaryProxy) -> bool:
    if set(p.domains) & set(q.domains):
        return False
    P = [h.index(W) for W in p.domains]
    return all(any(not h.orth(Pi, h.index(Q)) for Pi in P) for Q in q.domains)


@dataclass(frozen=True)
class BasicSetParams:
    r: object
    eps: Fraction
    x0: int | None = None

    def __post_init__(self):
        if Fraction(self.r) < 0:
            raise BoundaryError("basic set: r >= 0")
        if Fraction(self.eps) <= 0:
            raise BoundaryError("basic set: eps > 0")


@dataclass
class Membership:
    part: str
    conditions: dict = field(default_factory=dict)   # name -> {"ok": bool, "value": ...}

    def ok(self, name) -> bool:
        return self.conditions[name]["ok"]


def _cond(ok, value=None):
    return {"ok": bool(ok), "value": value}


def _ratio(a, b):
    return None if b is None or a is None or b == 0 else Fraction(a) / Fraction(b)


def interior_conditions(h: HhsStructure, p: BoundaryProxy, r, eps, x: int) -> dict:
    eps = Fraction(eps)
    x0 = h.ambient.basepoint
    d = {W: Fraction(h.d_W(W, x0, x)) for W in p.domains}
    worst = None
    ok1 = True
    for W in p.domains:
        g = h.graph(W)
        pr = _products2(h, W, p.horizon(W))[h.pi(W, x)]
        val = Fraction(int(pr), 2 * g.scale)
        worst = val if worst is None else min(worst, val)
        ok1 &= val > Fraction(r)
    out = {"I1": _cond(ok1, worst)}
    ok2, dev2 = True, Fraction(0)
    for W in p.domains:
        for V in p.domains:
            rt = _ratio(d[W], d[V])
            if rt is None:
                ok2, dev2 = False, None
                continue
            gap = abs(p.coef(W) / p.coef(V) - rt)
            if dev2 is not None:
                dev2 = max(dev2, gap)
            ok2 &= gap < eps
    out["I2"] = _cond(ok2, dev2)
    ok3, dev3 = True, Fraction(0)
    for t in perp_of(h, p.domains):
        dt = Fraction(h.d_W(t, x0, x))
        for W in p.domains:
            rt = _ratio(dt, d[W])
            if rt is None:
                ok3, dev3 = False, None
                continue
            if dev3 is not None:
                dev3 = max(dev3, rt)
            ok3 &= rt < eps
    out["I3"] = _cond(ok3, dev3)
    return out


def remote_conditions(h: HhsStructure, p: BoundaryProxy, q: BoundaryProxy, r, eps) -> dict:
    eps = Fraction(eps)
    out = {}
    ok1, worst = True, None
    dproj = {}
    for W in p.domains:
        try:
            S = boundary_projection(h, q, W)
        except BoundaryError:
            ok1 = False
            continue
        g = h.graph(W)
        if not len(S):
            ok1 = False
            continue
        pr = _products2(h, W, p.horizon(W))[S]
        val = Fraction(int(pr.min()), 2 * g.scale)
        worst = val if worst is None else min(worst, val)
        ok1 &= val > Fraction(r)
        dproj[W] = _dist_from_base(h, W, S)
    out["R1"] = _cond(ok1, worst)
    Sq = list(p.domains)
    for t in perp_of(h, p.domains):
        if any(not h.orth(t, h.index(Q)) for Q in q.domains):
            Sq.append(h.names[t])
    ok2, dev = True, Fraction(0)
    for W in Sq:
        if W not in dproj:
            try:
                dproj[W] = _dist_from_base(h, W, boundary_projection(h, q, W))
            except BoundaryError:
                dproj[W] = None
        for V in p.domains:
            rt = _ratio(dproj.get(W), dproj.get(V))
            if rt is None:
                ok2, dev = False, None
                continue
            gap = abs(rt - p.coef(W) / p.coef(V))
            if dev is not None:
                dev = max(dev, gap)
            ok2 &= gap < eps
    out["R2"] = _cond(ok2, dev)
    out["R2"]["S_q"] = Sq
    mass = sum((q.coef(h.names[t]) for t in perp_of(h, p.domains)), Fraction(0))
    out["R3"] = _cond(mass < eps, mass)
    return out


def nonremote_conditions(h: HhsStructure, p: BoundaryProxy, q: BoundaryProxy, r, eps) -> dict:
    eps = Fraction(eps)
    A = sorted(set(p.domains) & set(q.domains))
    ok1, worst = True, None
    for T in A:
        g = h.graph(T)
        val = Fraction(int(_products2(h, T, p.horizon(T))[q.horizon(T)]), 2 * g.scale)
        worst = val if worst is None else min(worst, val)
        ok1 &= val > Fraction(r)
    rest = sum((a for W, _, a in q.support if W not in A), Fraction(0))
    dev = max((abs(q.coef(T) - p.coef(T)) for T in A), default=Fraction(0))
    return {"N1": _cond(ok1, worst), "N2": _cond(rest < eps, rest),
            "N3": _cond(all(abs(q.coef(T) - p.coef(T)) < eps for T in A), dev)}


def basic_set_membership(h: HhsStructure, p: BoundaryProxy, params: BasicSetParams, candidate) -> Membership:
    """Which part of B_{r,eps}(p) contains the candidate (an ambient vertex or a proxy)."""
    r, eps = params.r, Fraction(params.eps)
    if params.x0 is not None and params.x0 != h.ambient.basepoint:
        raise BoundaryError("basic set basepoint must be the ambient basepoint")
    if isinstance(candidate, BoundaryProxy):
        if is_remote(h, p, candidate):
            c = remote_conditions(h, p, candidate, r, eps)
            part = REMOTE
        else:
            c = nonremote_conditions(h, p, candidate, r, eps)
            part = NON_REMOTE
    else:
        c = interior_conditions(h, p, r, eps, int(candidate))
        part = INTERIOR
    if not all(v["ok"] for v in c.values()):
        part = OUTSIDE
    return Membership(part, c)


# ---------------------------------------------------------------- transfer constants

@dataclass(frozen=True)
class TransferConstants:
    E: object
    kappa: object
    B: object
    sigma: object

    @property
    def C(self) -> Fraction:
        return 2 * Fraction(self.kappa) + 8 * Fraction(self.E) + 2 * Fraction(self.B) + 1

    def r_prime(self, r) -> Fraction:
        E, B, s = Fraction(self.E), Fraction(self.B), Fraction(self.sigma)
        return (Fraction(r) - B - s) / E - B - s - E - 2

    def R(self, r) -> Fraction:
        return max(self.r_prime(r), Fraction(r) - 4 * self.C)

    @property
    def r0_bound(self) -> Fraction:
        """The sufficient lower bound (2B + 2 sigma + E + 2) E."""
        E, B, s = Fraction(self.E), Fraction(self.B), Fraction(self.sigma)
        return (2 * B + 2 * s + E + 2) * E

    def as_dict(self) -> dict:
        return {"E": self.E, "kappa": self.kappa, "B": self.B, "sigma": self.sigma, "C": self.C}


def bar(mr: MaximizationResult, W) -> str:
    """W-bar: W itself when W is in T, else the maximal domain."""
    return W if W in mr.T else mr.source.names[mr.source.top]


def lift(h: HhsStructure, W, v: int) -> int:
    """Ambient vertex standing for v in C W: the preimage in F_W nearest x0 (lowest id on ties)."""
    w = h.index(W)
    pre = np.flatnonzero(h.proj[w] == int(v))
    if not len(pre):
        raise BoundaryError(f"no ambient vertex projects to {v} in C {h.names[w]}")
    if w != h.top:
        try:
            F = product_region(h, w).F
            inF = pre[np.isin(pre, F)]
            pre = inF if len(inF) else pre
        except Exception:
            pass
    d0 = h.ambient.dist_row(h.ambient.basepoint)[pre]
    return int(pre[int(np.argmin(d0))])


def _bar_horizon(mr: MaximizationResult, W, horizon: int) -> int:
    Wb = bar(mr, W)
    if Wb == W and W != mr.source.names[mr.source.top]:
        return int(horizon)
    return lift(mr.source, W, horizon)


def transfer_constants(mr: MaximizationResult, W, horizon: int, kappa=None) -> TransferConstants:
    h, ht = mr.source, mr.t_structure
    Wb = bar(mr, W)
    w, wb = h.index(W), ht.index(Wb)
    B = ray_stabilization_constant(h.domains[w].graph, horizon, h.pi(w, h.ambient.basepoint))
    hb = _bar_horizon(mr, W, horizon)
    gb = ht.domains[wb].graph
    B = max(Fraction(B), Fraction(ray_stabilization_constant(gb, hb, ht.pi(wb, ht.ambient.basepoint))))
    sigma = morse_sigma(mr.coned)
    kappa = h.kappa_p if kappa is None else kappa
    return TransferConstants(h.E, kappa, _num(B), sigma)


def _num(x):
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else x


def measure_r0(mr: MaximizationResult, W, horizon: int, rs, consts: TransferConstants | None = None) -> dict:
    """Smallest r in rs from which the moving-up implication holds in C_T S.

    For W in (S - T) + {S}: pi_W(x) in M_W(r, p) must force x in M(r', p) in
    the coned space. For W in T - {S} the implication is not needed and r0 is
    the first grid value.
    """
    rs = sorted(Fraction(r) for r in rs)
    consts = consts or transfer_constants(mr, W, horizon)
    h = mr.source
    top = h.names[h.top]
    per = {}
    if W in mr.T and W != top:
        return {"r0": rs[0], "per_r": per, "bound": consts.r0_bound}
    w = h.index(W)
    g = h.domains[w].graph
    inside = {}
    hb = lift(h, W, horizon)
    pb = doubled_products(mr.coned, hb, mr.coned.basepoint)
    pW = _products2(h, W, horizon)[h.proj[w]]
    for r in rs:
        sel = pW > r * 2 * g.scale
        ok = bool((pb[sel] > consts.r_prime(r) * 2 * mr.coned.scale).all())
        per[str(r)] = ok
        inside[r] = ok
    r0 = None
    for r in reversed(rs):
        if not inside[r]:
            break
        r0 = r
    return {"r0": r0, "per_r": per, "bound": consts.r0_bound}


@dataclass
class TransferResult:
    W: str
    W_bar: str
    r: object
    R_r: Fraction
    M_tilde: np.ndarray
    target_size: int
    ok: bool
    witness: int | None
    tightest: Fraction | None       # min product over M-tilde: containment holds for every R below it
    constants: TransferConstants


def transfer_neighborhood(mr: MaximizationResult, W, horizon: int, r, consts=None, r0=None) -> TransferResult:
    """M-tilde = N_C(pi-bar_{W-bar}(pi_W^{-1}(N_C(M°(r; p_W))))) and the check M-tilde in M(R_r; p-bar)."""
    h, ht = mr.source, mr.t_structure
    consts = consts or transfer_constants(mr, W, horizon)
    if r0 is not None and Fraction(r) < Fraction(r0):
        raise BoundaryError(f"r = {r} below r0 = {r0}")
    w = h.index(W)
    g = h.domains[w].graph
    C = consts.C
    Mo = np.flatnonzero(_in_M(g, _products2(h, W, horizon), r))
    N = neighborhood_C(g, Mo.tolist(), C) if len(Mo) else []
    pre = np.flatnonzero(np.isin(h.proj[w], np.asarray(N, dtype=np.int64)))
    Wb = bar(mr, W)
    wb = ht.index(Wb)
    gb = ht.domains[wb].graph
    img = np.unique(ht.proj[wb][pre]) if len(pre) else np.zeros(0, np.int64)
    Mt = np.asarray(neighborhood_C(gb, img.tolist(), C) if len(img) else [], dtype=np.int64)
    R = consts.R(r)
    hb = _bar_horizon(mr, W, horizon)
    pb = doubled_products(gb, hb, ht.pi(wb, ht.ambient.basepoint))
    target = _in_M(gb, pb, R)
    bad = Mt[~target[Mt]] if len(Mt) else Mt
    tight = Fraction(int(pb[Mt].min()), 2 * gb.scale) if len(Mt) else None
    return TransferResult(str(W), Wb, r, R, Mt, int(target.sum()), not len(bad),
                          int(bad[0]) if len(bad) else None, tight, consts)


def check_transfer_neighborhood(mr: MaximizationResult, W, horizon: int, rs) -> CheckReport:
    consts = transfer_constants(mr, W, horizon)
    r0 = measure_r0(mr, W, horizon, rs, consts)
    rep = CheckReport("transfer-neighborhood", dict(mr.model),
                      {"W": W, "horizon": horizon, "r_grid": list(rs), **consts.as_dict()})
    rep.params["horizon_radius"] = horizon_radius(mr.source, make_proxy(mr.source, {W: (horizon, 1)}, False))[W]
    rows = {}
    Rs = []
    for r in rs:
        if r0["r0"] is None or Fraction(r) < r0["r0"]:
            rows[str(r)] = {"skipped": "below r0"}
            continue
        res = transfer_neighborhood(mr, W, horizon, r, consts)
        Rs.append(res.R_r)
        rows[str(r)] = {"R_r": res.R_r, "M_tilde": len(res.M_tilde), "target": res.target_size,
                        "contained": res.ok, "tightest": res.tightest}
        if not res.ok:
            rep.fail({"r": r, "vertex": res.witness}, "M-tilde not contained in M(R_r)")
    mono = all(a <= b for a, b in zip(Rs, Rs[1:]))
    rep.record(mr.radius, rows=rows, r0=r0["r0"], r0_bound=r0["bound"], monotone=mono, W_bar=bar(mr, W))
    if not mono:
        rep.fail({"R": Rs}, "R_r not monotone")
    return rep


# ---------------------------------------------------------------- phi

def phi(mr: MaximizationResult, p: BoundaryProxy) -> BoundaryProxy:
    h = mr.source
    top = h.names[h.top]
    inner = [W for W in p.domains if W in mr.T and W != top]
    if len(inner) == len(p.domains):
        return p
    if inner or len(p.domains) != 1:
        raise BoundaryError("phi: mixed support")
    (P, hv, a), = p.support
    return BoundaryProxy.of([(top, lift(h, P, hv), a)])


# ---------------------------------------------------------------- experiments

def _interior(h, p, r, eps, x) -> bool:
    return all(v["ok"] for v in interior_conditions(h, p, r, eps, x).values())


def convergence_transfer_experiment(mr: MaximizationResult, p: BoundaryProxy, sequence, r, eps,
                                    s_ladder=None, tail=None, R: int = 2, name: str = "x") -> CheckReport:
    """Step-3 transfer of interior membership, with perturbation and quotient checks.

    The ladder uses s with 1/s <= eps, so B^int_{r+s,1/s}(p) sits inside B^int_{r,eps}(p).
    """
    h, ht = mr.source, mr.t_structure
    eps = Fraction(eps)
    s0 = math.ceil(1 / eps)
    s_ladder = (s0, s0 + 1, s0 + 2) if s_ladder is None else tuple(s for s in s_ladder if Fraction(1, s) <= eps)
    seq = [int(x) for x in sequence]
    pb = phi(mr, p)
    consts = [transfer_constants(mr, W, p.horizon(W)) for W in p.domains]
    Rr = max(c.R(r) for c in consts)
    n0 = len(seq) // 2 if tail is None else int(tail)
    rep = CheckReport("convergence-transfer", dict(mr.model),
                      {"proxy": p.to_dict(), "phi": pb.to_dict(), "sequence": name, "r": r, "eps": eps,
                       "R_r": Rr, "tail": n0, "perturbation": R, "s_ladder": list(s_ladder),
                       "horizon_radius": horizon_radius(h, p)})
    in_S = [_interior(h, p, r, eps, x) for x in seq]
    in_T = [_interior(ht, pb, Rr, eps, x) for x in seq]
    ladder = {}
    for s in s_ladder:
        idx = [n for n, x in enumerate(seq) if _interior(h, p, Fraction(r) + s, Fraction(1, s), x)]
        bad = [n for n in idx if not in_T[n]]
        ladder[str(s)] = {"inside": idx, "transferred": not bad}
        if bad:
            rep.fail({"s": s, "n": bad[0], "vertex": seq[bad[0]]}, "ladder member not in the T basic set")
    tail_in = all(in_S[n0:]) and n0 < len(seq)
    consistent = all(t or not s for s, t in zip(in_S, in_T))
    if tail_in and not all(in_T[n0:]):
        n = next(n for n in range(n0, len(seq)) if not in_T[n])
        rep.fail({"n": n, "vertex": seq[n]}, "tail member not in the T basic set")
    pert = _perturbation(h, p, seq, n0, r, eps, R) if tail_in else None
    if pert is not None:
        if not pert["shift_ok"]:
            rep.fail(pert["shift_witness"], "perturbation moved a projection more than E*R + E")
        if pert["n1"] is None:
            rep.fail({"perturbation": R}, "perturbed tail never enters the basic set")
        if not pert["quotient_ok"]:
            rep.fail({"quotient": pert["quotient_deviation"]}, "ratio deviation at the horizon not below eps")
    rep.record(mr.radius, in_S=in_S, in_T=in_T, tail_in_S=tail_in, consistent=consistent,
               ladder=ladder, perturbation=pert, C=[c.C for c in consts])
    return rep


def _perturbation(h, p, seq, n0, r, eps, R) -> dict:
    X = h.ambient
    x0 = X.basepoint
    lim = X.ticks(R)
    act = h.active()
    bound = Fraction(h.E) * R + Fraction(h.E)
    d0 = {v: h.domains[v].graph.dist_row(h.pi(v, x0)) for v in act}
    shift, witness = Fraction(0), None
    good = []
    pairs = _ratio_pairs(h, p)
    qdev = Fraction(0)
    for n in range(n0, len(seq)):
        x = seq[n]
        ys = np.flatnonzero(X.dist_row(x) <= lim)
        for v in act:
            g = h.domains[v].graph
            diff = np.abs(d0[v][h.proj[v][ys]] - d0[v][h.proj[v][x]])
            m = Fraction(int(diff.max()), g.scale)
            if m > shift:
                shift, witness = m, {"n": n, "domain": h.names[v]}
        good.append(all(_interior(h, p, r, eps, int(y)) for y in ys))
        if n == len(seq) - 1:
            for W, V in pairs:
                w, v = h.index(W), h.index(V)
                A = Fraction(int(d0[w][h.proj[w][x]]), h.graph(w).scale)
                Bv = Fraction(int(d0[v][h.proj[v][x]]), h.graph(v).scale)
                if Bv == 0:
                    continue
                for y in ys.tolist():
                    Cy = Fraction(int(d0[w][h.proj[w][y]]), h.graph(w).scale)
                    Dy = Fraction(int(d0[v][h.proj[v][y]]), h.graph(v).scale)
                    if Dy == 0:
                        qdev = None
                        break
                    if qdev is not None:
                        qdev = max(qdev, abs(Cy / Dy - A / Bv))
    n1 = None
    for k in range(len(good) - 1, -1, -1):
        if not good[k]:
            break
        n1 = n0 + k
    return {"shift": shift, "bound": bound, "shift_ok": shift <= bound, "shift_witness": witness,
            "n1": n1, "quotient_deviation": qdev, "quotient_ok": qdev is not None and qdev < Fraction(eps)}


def _ratio_pairs(h, p):
    """(numerator, denominator) domain pairs of the I2 and I3 ratios."""
    pairs = [(W, V) for W in p.domains for V in p.domains if W != V]
    pairs += [(h.names[t], W) for t in perp_of(h, p.domains) for W in p.domains]
    return pairs


def _joint_diameter(h: HhsStructure, W, A, B):
    S = np.unique(np.concatenate([np.asarray(A, np.int64), np.asarray(B, np.int64)]))
    w = h.index(W)
    g = h.domains[w].graph
    return Fraction(g.set_diameter_ticks(S), g.scale)


def classify_pattern(mr: MaximizationResult, p: BoundaryProxy, q: BoundaryProxy, W=None):
    """Which of the three switching lemmas applies, or the reason none does."""
    h, ht = mr.source, mr.t_structure
    top = h.names[h.top]
    if not is_remote(h, p, q):
        return None, "q not remote to p"
    pb, qb = phi(mr, p), phi(mr, q)
    rem_T = is_remote(ht, pb, qb)
    inner = set(p.domains) <= set(mr.T) - {top}
    Q = q.domains[0] if len(q.domains) == 1 else None
    outer_q = Q is not None and (Q == top or Q not in mr.T)
    if W is not None:
        if not (rem_T and inner and outer_q):
            return None, "joint-diameter pattern needs supp(p) in T - {S}, supp(q) = {Q} outside T - {S}, both remote"
        w = h.index(W)
        in_perp = w in perp_of(h, p.domains) and not h.orth(w, h.index(Q))
        if W not in p.domains and not in_perp:
            return None, "W neither in supp(p) nor in supp(p)^perp off Q"
        return "joint-diameter", ""
    if rem_T:
        if len(p.domains) == 1 and pb.domains == (top,):
            return "remote-diff-support", ""
        if inner:
            return "remote-same-support", ""
        return None, "remote pattern with supp(p) = {S}"
    if len(p.domains) == 1 and pb.domains == (top,) and p.domains[0] != top:
        return "non-remote", ""
    return None, "q-bar not remote to p-bar and supp(p) is not a single domain outside T - {S}"


def verify_boundary_projection_transfer(mr: MaximizationResult, p: BoundaryProxy, q: BoundaryProxy, W=None,
                                        rs=None) -> CheckReport:
    h, ht = mr.source, mr.t_structure
    pattern, reason = classify_pattern(mr, p, q, W)
    rep = CheckReport("boundary-projection-transfer", dict(mr.model),
                      {"p": p.to_dict(), "q": q.to_dict(), "W": W, "pattern": pattern,
                       "horizon_radius": horizon_radius(h, p)})
    if pattern is None:
        rep.verdict = SKIPPED
        rep.notes.append(reason)
        return rep
    pb, qb = phi(mr, p), phi(mr, q)
    P0 = p.domains[0]
    consts = transfer_constants(mr, P0, p.horizon(P0))
    rep.params.update(consts.as_dict())
    if pattern == "joint-diameter":
        sigma = max(Fraction(morse_sigma(h.graph(q.domains[0]))), Fraction(morse_sigma(mr.coned)))
        A = boundary_projection(h, q, W)
        Bt = boundary_projection(ht, qb, W)
        if not len(A) or not len(Bt):
            rep.verdict = SKIPPED
            rep.notes.append("Z-set empty: horizon closer than E + sigma")
            return rep
        diam = _joint_diameter(h, W, A, Bt)
        bound = consts.C - 2 * Fraction(h.E)
        rep.record(mr.radius, joint_diameter=diam, sigma=sigma, measured=diam + sigma, bound=bound,
                   S_projection=A, T_projection=Bt)
        if diam + sigma > bound:
            rep.fail({"W": W, "diameter": diam}, "joint diameter exceeds C - 2E")
        return rep
    rs = list(range(0, int(Fraction(max(horizon_radius(h, p).values()))) + 1)) if rs is None else rs
    rows = {}
    for r in rs:
        R = consts.R(r)
        if pattern == "remote-diff-support":
            Wh, Wt = P0, pb.domains[0]
            hyp = _contained(h, Wh, boundary_projection(h, q, Wh), p.horizon(Wh), r)
            con = _contained(ht, Wt, boundary_projection(ht, qb, Wt), pb.horizon(Wt), R)
        elif pattern == "remote-same-support":
            hyp = all(_contained(h, P, boundary_projection(h, q, P), p.horizon(P), r) for P in p.domains)
            con = all(_contained(ht, P, boundary_projection(ht, qb, P), pb.horizon(P), R) for P in p.domains)
        else:
            hyp = _contained(h, P0, boundary_projection(h, q, P0), p.horizon(P0), r)
            Wt = pb.domains[0]
            con = _contained(ht, Wt, [qb.horizon(qb.domains[0])], pb.horizon(Wt), R)
        rows[str(r)] = {"R_r": R, "hypothesis": hyp, "conclusion": con}
        if hyp and not con:
            rep.fail({"r": r}, "implication fails")
    rep.record(mr.radius, rows=rows)
    return rep


def _contained(h: HhsStructure, W, S, horizon: int, r) -> bool:
    S = np.asarray(S, dtype=np.int64)
    if not len(S):
        return False
    g = h.graph(W)
    return bool(_in_M(g, _products2(h, W, horizon)[S], r).all())


# ---------------------------------------------------------------- element classification

@dataclass
class Classification:
    word: str
    K: int
    achieved_K: int
    big_set: list
    label: str
    big_set_T: list
    label_T: str
    cross_check: bool
    morse: dict
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def big_set(h: HhsStructure, verts, D_big) -> list:
    out = []
    for i in h.active():
        img = np.unique(h.proj[i][verts])
        g = h.domains[i].graph
        if Fraction(g.set_diameter_ticks(img), g.scale) >= Fraction(D_big):
            out.append(h.names[i])
    return out


def _label(h: HhsStructure, bs) -> str:
    if not bs:
        return TRIVIAL
    return IRREDUCIBLE if bs == [h.names[h.top]] else REDUCIBLE


def classify_element(model: Model, mr: MaximizationResult | None, word, K: int, D_big=None) -> Classification:
    h = model.structure
    mr = mr or maximize(h)
    D_big = h.d_inf if D_big is None else D_big
    verts, k = orbit(model, word, K)
    warn = []
    if k < K:
        warn.append(f"orbit left the ball: achieved K = {k}")
    bs = big_set(mr.source, verts, D_big)
    bt = big_set(mr.t_structure, verts, D_big)
    mapped = sorted({bar(mr, W) for W in bs})
    fit = fit_unparametrized_qg(h.ambient, verts) if len(verts) > 1 else None
    morse = {"K_off": fit.K_off, "K_back": fit.K_back, "K_gap": fit.K_gap} if fit else {}
    return Classification(word, K, k, bs, _label(mr.source, bs), bt, _label(mr.t_structure, bt),
                          mapped == sorted(bt), morse, warn)


def classification_report(models, word, K: int, D_big=None, expect=None) -> CheckReport:
    """Classify one element across a radius ladder; Morse-likeness must stay bounded."""
    rep = CheckReport("classify", dict(models[0].structure.model), {"word": word, "K": K, "D_big": D_big})
    fits = {}
    for m in models:
        c = classify_element(m, None, word, K, D_big)
        rep.record(m.spec.radius, **c.as_dict())
        fits[m.spec.radius] = max(c.morse.values(), default=0)
        rep.notes.extend(c.warnings)
        if not c.cross_check:
            rep.fail({"radius": m.spec.radius, "S": c.big_set, "T": c.big_set_T}, "T big set differs from the mapped S big set")
        if expect is not None and (c.label, c.big_set) != expect:
            rep.fail({"radius": m.spec.radius, "label": c.label, "big_set": c.big_set}, "unexpected classification")
    ok, excess = bounded_across(fits)
    rep.constants["ladder"] = {"morse": fits, "excess": excess}
    if not ok:
        rep.fail({"morse": fits}, "Morse-likeness grows across radii")
    return rep


__all__ = ["BoundaryProxy", "BoundaryError", "BasicSetParams", "Membership", "TransferConstants",
           "TransferResult", "Classification", "make_proxy", "validate_proxy", "proxy_toward",
           "boundary_projection", "z_set", "is_remote", "basic_set_membership", "interior_conditions",
           "remote_conditions", "nonremote_conditions", "transfer_constants", "transfer_neighborhood",
           "check_transfer_neighborhood", "measure_r0", "phi", "lift", "bar", "convergence_transfer_experiment",
           "verify_boundary_projection_transfer", "classify_pattern", "classify_element", "big_set",
           "classification_report", "horizon_radius", "perp_of", "morse_sigma",
           "REMOTE", "NON_REMOTE", "INTERIOR", "OUTSIDE", "TRIVIAL", "REDUCIBLE", "IRREDUCIBLE",
           "StructureError"]
