"""Maximized structures: essential filter, the retained set T, the coned space
C_T S, and verifiers for the properties that should survive the change of
structure.

Every f-slice of P_W (every parallel copy of F_W) is coned for W in T - {S};
the reports carry the flag "cone-all-parallel-copies". Uniformity claims are
tested as boundedness across a radius ladder: a constant measured at the
largest radius may exceed its value at the smallest radius by at most the
slack (default 1).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .hhs_core.axioms import check_axiom
from .hhs_core.paths import find_hierarchy_path, hierarchy_path_fit
from .hhs_core.regions import gate, is_hierarchically_quasiconvex, product_region
from .hhs_core.structure import Domain, HhsStructure
from .metric_graph import (MetricGraph, closest_point_projection, estimate_delta,
                           quasiconvexity_constant)
from .report import CheckReport

CONE_FLAG = "cone-all-parallel-copies"
LEMMAS = ("hierarchy-path-transfer", "hqc-transfer", "gate-vs-cpp", "y-quasiconvex", "coned-hyperbolicity")
DEFAULT_SLACK = 1


class MaximizationError(ValueError):
    pass


@dataclass
class MaximizationResult:
    source: HhsStructure              # structure over S_ess
    essential: list
    T: list
    coned: MetricGraph                # C_T S
    t_structure: HhsStructure         # index set T, top space C_T S
    aux: HhsStructure                 # C_T S as a hyperbolic HHS over (S - T) + {S}
    regions: dict                     # W -> ProductRegion for W in T - {S}
    trace: list = field(default_factory=list)
    cross_check: dict = field(default_factory=dict)

    @property
    def radius(self):
        return self.source.radius

    @property
    def model(self):
        return self.source.model

    def summary(self) -> dict:
        return {"essential": self.essential, "T": self.T, "trace": self.trace,
                "cross_check": self.cross_check, "coned_cliques": len(self.coned.cliques),
                "flags": [CONE_FLAG]}


# ---------------------------------------------------------------- step 1

def essential_filter(h: HhsStructure):
    """Keep U iff some V nested in U (or U itself) has C V unbounded."""
    act = h.active()
    keep, trace = [], []
    top = h.top
    for u in act:
        if any(h.unbounded(v) for v in h.below(u)):
            keep.append(h.names[u])
        elif u == top:
            keep.append(h.names[u])
            trace.append({"domain": h.names[u], "action": "kept",
                          "reason": "maximal domain has no unbounded nested domain (bounded space)"})
        else:
            trace.append({"domain": h.names[u], "action": "removed",
                          "reason": f"every nested domain has diameter below D_inf={h.d_inf}"})
    if len(keep) == len(act) and not any(d.dummy for d in h.domains):
        return h, trace
    return h.restrict(keep), trace


# ---------------------------------------------------------------- step 2

def _proj_diam(h: HhsStructure, v: int, verts) -> Fraction:
    img = np.unique(h.proj[v][verts])
    return Fraction(int(h.dm(v)[np.ix_(img, img)].max()), h.domains[v].graph.scale)


def build_T(h: HhsStructure):
    """T = {S} plus every W whose F_W and E_W are both unbounded.

    F_W counts as unbounded when some V nested in W sees it with projection
    diameter at least D_inf; E_W likewise through some V orthogonal to W. The
    result is cross-checked against the orthogonal-complement test (some
    unbounded V orthogonal to W).
    """
    top = h.top
    T = [h.names[top]]
    regions, check = {}, {}
    D = Fraction(h.d_inf)
    X = h.ambient
    for w in h.active():
        if w == top:
            continue
        reg = product_region(h, w)
        F, E = reg.F, reg.E
        f_unb = any(_proj_diam(h, v, F) >= D for v in h.below(w))
        e_unb = any(_proj_diam(h, v, E) >= D for v in h.perp(w))
        alt = any(h.unbounded(v) for v in h.perp(w))
        check[h.names[w]] = {
            "F_unbounded": f_unb, "E_unbounded": e_unb, "perp_unbounded": alt,
            "F_diam_X": X.length(X.set_diameter_ticks(F)), "E_diam_X": X.length(X.set_diameter_ticks(E)),
            "agree": (f_unb and e_unb) == alt,
        }
        if f_unb and e_unb:
            T.append(h.names[w])
            regions[h.names[w]] = reg
    return T, regions, check


def cone_off(h: HhsStructure, T, regions=None) -> MetricGraph:
    """Ambient graph plus a unit clique on every f-slice of P_W, W in T - {S}."""
    top = h.names[h.top]
    cl = []
    for W in T:
        if W == top:
            continue
        reg = regions[W] if regions and W in regions else product_region(h, W)
        for sid, verts in reg.f_slices().items():
            if len(verts) >= 2:
                cl.append((verts.tolist(), (W, sid)))
    return h.ambient.with_cliques(cl) if cl else h.ambient


def assemble_maximized(h: HhsStructure, T, coned: MetricGraph, regions) -> tuple[HhsStructure, HhsStructure]:
    """The T-structure on X (top space C_T S) and the hyperbolic view of C_T S."""
    top = h.names[h.top]
    n = h.ambient.n
    ident = np.arange(n)
    tset = set(T)
    # T-structure
    doms = [Domain(top, coned)] + [h.domains[h.index(W)] for W in T if W != top]
    rels, proj, up, down = {}, {top: ident}, {}, {}
    others = [W for W in T if W != top]
    for W in others:
        i = h.index(W)
        proj[W] = h.proj[i]
        rels[(W, top)] = "nested"
        up[(W, top)] = regions[W].F.tolist()
        down[(W, top)] = h.proj[i]
    for a_pos, A in enumerate(others):
        for B in others[a_pos + 1:]:
            i, j = h.index(A), h.index(B)
            kind = {1: "nested", 2: "contains", 3: "orthogonal", 4: "transverse"}[int(h.rel[i, j])]
            rels[(A, B)] = kind
            for a, b in ((A, B), (B, A)):
                key = (h.index(a), h.index(b))
                if key in h.rho_up:
                    up[(a, b)] = h.rho_up[key]
                if key in h.rho_down:
                    down[(a, b)] = h.rho_down[key]
    ht = HhsStructure(h.ambient, doms, rels, proj, up, down, E=h.E, d_inf=h.d_inf,
                      kappa_p=h.kappa_p, radius=h.radius, model=dict(h.model, view="T"))
    # auxiliary hyperbolic structure on C_T S over (S - T) + {S}
    keep = [top] + [h.names[i] for i in h.active() if h.names[i] not in tset]
    sub = h.restrict(keep)
    args = sub.constructor_args()
    args["ambient"] = coned
    args["model"] = dict(h.model, view="coned")
    aux = HhsStructure(**args)
    return ht, aux


def maximize(h: HhsStructure) -> MaximizationResult:
    ess, trace = essential_filter(h)
    T, regions, check = build_T(ess)
    coned = cone_off(ess, T, regions)
    ht, aux = assemble_maximized(ess, T, coned, regions)
    return MaximizationResult(ess, [ess.names[i] for i in ess.active()], T, coned, ht, aux,
                              regions, trace, check)


def check_maximized(mr: MaximizationResult, budget: int = 50_000, seed: int = 0) -> list[CheckReport]:
    """Axiom checks on both assembled structures; containers skipped with a notice."""
    out = []
    for view, st in (("T", mr.t_structure), ("coned", mr.aux)):
        for aid in range(1, 12):
            if aid == 6:
                rep = CheckReport("axiom-06-containers", dict(st.model), {"view": view}, verdict="skipped")
                rep.notes.append("container axiom not required of the maximized structure")
            else:
                rep = check_axiom(st, aid, budget=budget, seed=seed)
                rep.params["view"] = view
            rep.flags.append(CONE_FLAG)
            out.append(rep)
    return out


# ---------------------------------------------------------------- verifiers

def bounded_across(values: dict, slack=DEFAULT_SLACK):
    """(ok, excess): value at the largest radius minus value at the smallest."""
    rs = sorted(values, key=lambda r: Fraction(r))
    if len(rs) < 2:
        return True, 0
    excess = Fraction(values[rs[-1]]) - Fraction(values[rs[0]])
    return excess <= Fraction(slack), excess


def _ladder(mrs):
    return mrs if isinstance(mrs, (list, tuple)) else [mrs]


def _report(name, mrs, **params):
    first = _ladder(mrs)[0]
    model = {k: v for k, v in first.model.items() if k != "radius"}
    p = {"slack": DEFAULT_SLACK}
    p.update(params)
    rep = CheckReport(name, model, p)
    rep.flags.append(CONE_FLAG)
    return rep


def _finish(rep, series: dict, slack):
    for key, vals in series.items():
        ok, excess = bounded_across(vals, slack)
        rep.params.setdefault("excess", {})[key] = excess
        if not ok:
            rep.fail({"constant": key, "values": vals}, f"{key} grows across radii by {excess}")
    return rep


def sample_pairs(n: int, k: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < k:
        a, b = rng.integers(0, n, 2).tolist()
        if a != b:
            out.append((a, b))
    return out


def verify_hierarchy_path_transfer(mrs, n_paths: int = 50, lam=None, seed: int = 0,
                                   slack=DEFAULT_SLACK) -> CheckReport:
    """Hierarchy paths of one structure measured as hierarchy paths of the other."""
    rep = _report("hierarchy-path-transfer", mrs, n_paths=n_paths, seed=seed)
    s_to_t, t_to_s, self_s, self_t = {}, {}, {}, {}
    for mr in _ladder(mrs):
        hs, ht = mr.source, mr.t_structure
        lam0 = hs.E if lam is None else lam
        best = [Fraction(0)] * 4
        for a, b in sample_pairs(hs.ambient.n, n_paths, seed):
            ps = find_hierarchy_path(hs, a, b, lam0)
            pt = find_hierarchy_path(ht, a, b, lam0)
            vals = (ps.lam, hierarchy_path_fit(ht, ps.path).lam, pt.lam, hierarchy_path_fit(hs, pt.path).lam)
            best = [max(x, Fraction(y)) for x, y in zip(best, vals)]
        r = str(mr.radius)
        self_s[r], s_to_t[r], self_t[r], t_to_s[r] = best
        rep.record(mr.radius, lambda_S=best[0], lambda_S_in_T=best[1], lambda_T=best[2], lambda_T_in_S=best[3])
    return _finish(rep, {"lambda_S_in_T": s_to_t, "lambda_T_in_S": t_to_s}, slack)


def _envelope_excess(envs: dict):
    """Largest growth of k(r) between the smallest and largest radius on shared r.

    Only r <= half the smallest radius count: past that the small ball cuts
    off the sublevel set and k(r) is a truncation artefact.
    """
    rs = sorted(envs, key=lambda r: Fraction(r))
    small, big = envs[rs[0]], envs[rs[-1]]
    cap = int(Fraction(rs[0])) // 2
    shared = [r for r in small if r in big and r <= cap]
    return max((Fraction(big[r]) - Fraction(small[r]) for r in shared), default=Fraction(0))


def verify_hqc_transfer(mrs, subsets: dict, seed: int = 0, slack=DEFAULT_SLACK) -> CheckReport:
    """subsets: name -> (fn(mr) -> vertex set, expected_hqc).

    A subset counts as HQC in a structure when part (1) holds at every radius,
    k(0) moves by at most the slack and the realization envelope k(r) grows by
    at most the slack across the ladder.
    """
    rep = _report("hqc-transfer", mrs, subsets=sorted(subsets), seed=seed)
    for name, (fn, expected) in sorted(subsets.items()):
        verdicts = {}
        for view in ("S", "T"):
            k0s, envs, part1 = {}, {}, True
            for mr in _ladder(mrs):
                st = mr.source if view == "S" else mr.t_structure
                sub = is_hierarchically_quasiconvex(st, fn(mr), seed=seed, name=name)
                c = sub.constants[str(st.radius)]
                k0s[str(st.radius)] = c["k0"]
                envs[str(st.radius)] = {int(r): v for r, v in c["envelope"].items()}
                part1 &= sub.passed
            ok0, ex0 = bounded_across(k0s, slack)
            exenv = _envelope_excess(envs) if len(envs) > 1 else 0
            hqc = part1 and ok0 and exenv <= slack
            verdicts[view] = hqc
            rep.params.setdefault("detail", {})[f"{name}/{view}"] = {
                "k0": k0s, "k0_excess": ex0, "envelope_excess": exenv, "hqc": hqc}
        if not (verdicts["S"] == verdicts["T"] == expected):
            rep.fail({"subset": name, "expected": expected, "S": verdicts["S"], "T": verdicts["T"]},
                     f"{name}: HQC verdicts disagree")
    return rep


def verify_gate_vs_cpp(mrs, subsets: dict, n_points: int = 100, seed: int = 0,
                       slack=DEFAULT_SLACK) -> CheckReport:
    """C1: closest points of Y in C_T S vs the S-gate; C2: S-gate vs T-gate (in C_T S).

    subsets: name -> fn(mr) -> vertex set. n_points points are sampled per subset.
    """
    rep = _report("gate-vs-cpp", mrs, subsets=sorted(subsets), n_points=n_points, seed=seed)
    c1s, c2s = {}, {}
    for mr in _ladder(mrs):
        hs, ht, cg = mr.source, mr.t_structure, mr.coned
        rng = np.random.default_rng(seed)
        c1 = c2 = 0
        count = 0
        for name, fn in sorted(subsets.items()):
            Y = np.asarray(sorted({int(y) for y in fn(mr)}), dtype=np.int64)
            xs = rng.integers(0, hs.ambient.n, size=n_points)
            for x in xs.tolist():
                gs = gate(hs, Y, x)
                gt = gate(ht, Y, x)
                near = closest_point_projection(cg, Y, x)
                c1 = max(c1, int(cg.dist_row(gs)[near].max()))
                c2 = max(c2, int(cg.dist_row(gs)[gt]))
                count += 1
        r = str(mr.radius)
        c1s[r], c2s[r] = cg.length(c1), cg.length(c2)
        rep.record(mr.radius, C1=c1s[r], C2=c2s[r], pairs=count)
    return _finish(rep, {"C1": c1s, "C2": c2s}, slack)


def verify_y_quasiconvex(mrs, limit: int = 10, slack=DEFAULT_SLACK) -> CheckReport:
    """Y_W = pi_S(F_W) for W in S - T is quasiconvex in C_T S, uniformly in the radius."""
    rep = _report("y-quasiconvex", mrs, limit=limit)
    ks = {}
    for mr in _ladder(mrs):
        h = mr.source
        top = h.top
        gone = [i for i in h.active() if i != top and h.names[i] not in mr.T][:limit]
        worst = Fraction(0)
        per = {}
        for i in gone:
            Y = product_region(h, i).F
            k = quasiconvexity_constant(mr.coned, Y)
            per[h.names[i]] = k
            worst = max(worst, Fraction(k))
        ks[str(mr.radius)] = worst
        rep.record(mr.radius, k0=worst, domains=len(gone), per_domain=per)
    return _finish(rep, {"k0": ks}, slack)


def verify_coned_hyperbolicity(mrs, budget: int = 200_000, seed: int = 0, slack=DEFAULT_SLACK) -> CheckReport:
    rep = _report("coned-hyperbolicity", mrs, budget=budget, seed=seed)
    ds = {}
    for mr in _ladder(mrs):
        est = estimate_delta(mr.coned, sample_budget=budget, seed=seed)
        ds[str(mr.radius)] = est.delta
        rep.record(mr.radius, delta=est.delta, exhaustive=est.exhaustive, triples=est.triples,
                   diameter=mr.coned.diameter())
    return _finish(rep, {"delta": ds}, slack)
