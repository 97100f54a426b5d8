"""Finite-model verification of the eleven HHS axioms.

Each check returns a CheckReport with a verdict, measured constants keyed by
the model radius, and the first witness found on failure. Checks are
exhaustive when the number of tuples fits the budget and otherwise use seeded
sampling; the report records which.

Witnesses are the first failing tuple in vertex order, except for
consistency, where the vertex with the largest violation is reported.

Conventions: the distance from a point to a set is the minimum distance; the
container axiom is checked in its standard strict form (the container is a
proper subdomain of W), since with Q = W allowed it holds vacuously.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np

from ..metric_graph import estimate_delta
from ..report import CheckReport
from .structure import HhsStructure

AXIOMS = {
    1: "projections", 2: "nesting", 3: "orthogonality", 4: "transversality",
    5: "finite-complexity", 6: "containers", 7: "uniqueness",
    8: "bounded-geodesic-image", 9: "large-links", 10: "consistency",
    11: "partial-realization",
}
AXIOM_IDS = {v: k for k, v in AXIOMS.items()}
DEFAULT_BUDGET = 200_000


class AxiomError(ValueError):
    pass


def axiom_id(which) -> int:
    if isinstance(which, str) and which.isdigit():
        which = int(which)
    if isinstance(which, int) and which in AXIOMS:
        return which
    if isinstance(which, str) and which in AXIOM_IDS:
        return AXIOM_IDS[which]
    raise AxiomError(f"unknown axiom id {which!r}")


def _report(h: HhsStructure, aid: int, budget, seed, **params) -> CheckReport:
    p = {"E": h.E, "D_inf": h.d_inf, "kappa_P": h.kappa_p, "budget": budget, "seed": seed}
    p.update(params)
    return CheckReport(f"axiom-{aid:02d}-{AXIOMS[aid]}", dict(h.model), p)


def _vlabel(h: HhsStructure, x: int):
    lab = h.ambient.labels
    return [int(x), lab[x]] if lab is not None else int(x)


def _set_dist(h: HhsStructure, i: int, S) -> np.ndarray:
    """Ticks from every vertex of C_i to the vertex set S."""
    return h.dm(i)[np.asarray(S, dtype=np.int64)].min(axis=0)


def _set_diam(h: HhsStructure, i: int, S) -> int:
    S = np.unique(np.asarray(S, dtype=np.int64))
    if len(S) <= 1:
        return 0
    return int(h.dm(i)[np.ix_(S, S)].max())


def _pairs(n: int, budget: int, rng):
    total = n * (n - 1) // 2
    if total <= budget:
        iu = np.triu_indices(n, 1)
        return iu[0], iu[1], True
    xs = rng.integers(0, n, size=budget)
    ys = rng.integers(0, n, size=budget)
    keep = xs != ys
    return xs[keep], ys[keep], False


def check_axiom(h: HhsStructure, which, budget: int = DEFAULT_BUDGET, seed: int = 0) -> CheckReport:
    aid = axiom_id(which)
    fn = {1: _projections, 2: _nesting, 3: _orthogonality, 4: _transversality,
          5: _complexity, 6: _containers, 7: _uniqueness, 8: _bgi, 9: _large_links,
          10: _consistency, 11: _partial_realization}[aid]
    rep = _report(h, aid, budget, seed)
    fn(h, rep, budget, np.random.default_rng(seed))
    return rep


def check_all(h: HhsStructure, budget: int = DEFAULT_BUDGET, seed: int = 0, skip=()) -> list[CheckReport]:
    out = []
    skip_ids = {axiom_id(s) for s in skip}
    for aid in AXIOMS:
        if aid in skip_ids:
            rep = _report(h, aid, budget, seed)
            rep.verdict = "skipped"
            rep.notes.append("skipped by request")
            out.append(rep)
        else:
            out.append(check_axiom(h, aid, budget, seed))
    return out


# ---------------------------------------------------------------- (1)

def _projections(h, rep, budget, rng):
    X = h.ambient
    E = Fraction(h.E)
    act = h.active()
    xs, ys, exhaustive = _pairs(X.n, max(1, budget // max(1, len(act))), rng)
    eu = np.asarray([u for u, v, _ in X.edges], dtype=np.int64)
    ev = np.asarray([v for u, v, _ in X.edges], dtype=np.int64)
    xs = np.concatenate([xs, eu])
    ys = np.concatenate([ys, ev])
    dX = X.distance_matrix()[xs, ys]
    worst_ratio = Fraction(0)
    deltas = {}
    seen_graphs = {}
    for i in act:
        g = h.domains[i].graph
        P = h.proj[i]
        DW = h.dm(i)
        dW = DW[P[xs], P[ys]]
        # d_W <= E d_X + E, compared in exact ticks
        # d_W/gs <= E (d_X/xs + 1), cross-multiplied into integer ticks
        viol = dW * X.scale * E.denominator > E.numerator * (dX + X.scale) * g.scale
        if viol.any():
            k = int(np.flatnonzero(viol)[0])
            return rep.fail({"domain": h.names[i], "x": _vlabel(h, int(xs[k])), "y": _vlabel(h, int(ys[k])),
                             "d_W": g.length(int(dW[k])), "d_X": X.length(int(dX[k]))},
                            f"pi_{h.names[i]} is not (E,E)-coarsely Lipschitz")
        pos = dX > 0
        if pos.any():
            worst_ratio = max(worst_ratio, Fraction(int(dW[pos].max()), g.scale))
        covered = _set_dist(h, i, np.unique(P))
        if covered.max() > g.ticks_floor(E):
            v = int(np.argmax(covered))
            return rep.fail({"domain": h.names[i], "vertex": v}, f"C {h.names[i]} not within E of pi(X)")
        key = id(g)
        if key not in seen_graphs:
            est = estimate_delta(g, sample_budget=min(budget, 20_000), seed=int(rng.integers(1 << 30)))
            seen_graphs[key] = est
        est = seen_graphs[key]
        deltas[h.names[i]] = est.delta
        if Fraction(est.delta) > E:
            return rep.fail({"domain": h.names[i], "triple": list(est.witness or ())},
                            f"C {h.names[i]} measured delta {est.delta} exceeds E")
    rep.record(h.radius, max_projected_distance=worst_ratio, max_domain_delta=max(deltas.values(), default=0),
               pairs_exhaustive=exhaustive)


# ---------------------------------------------------------------- (2)-(6)

def _nesting(h, rep, budget, rng):
    act = h.active()
    for i in act:
        for j in act:
            for k in act:
                if h.nested(i, j) and h.nested(j, k) and not h.nested(i, k):
                    return rep.fail([h.names[i], h.names[j], h.names[k]], "nesting not transitive")
    cands = h.maximal_candidates()
    full = [i for i in cands if all(h.nested_eq(j, i) for j in act)]
    if len(full) != 1:
        return rep.fail([h.names[i] for i in cands], "no unique nest-maximal domain")
    worst = 0
    for (i, j), arr in h.rho_up.items():
        if not h.nested(i, j):
            continue
        dmax = _set_diam(h, j, arr)
        worst = max(worst, dmax)
        if dmax > h.ticks(j, h.E):
            return rep.fail([h.names[i], h.names[j]], "rho set too large")
    rep.record(h.radius, max_rho_diameter=worst, maximal=h.names[full[0]])


def _orthogonality(h, rep, budget, rng):
    act = h.active()
    for i in act:
        for j in act:
            if h.orth(i, j) != h.orth(j, i):
                return rep.fail([h.names[i], h.names[j]], "orthogonality not symmetric")
            if h.orth(i, j) and (h.nested(i, j) or h.nested(j, i)):
                return rep.fail([h.names[i], h.names[j]], "orthogonal domains are nested")
    for v in act:
        for w in act:
            if not h.nested(v, w):
                continue
            for u in act:
                if h.orth(w, u) and not h.orth(v, u):
                    return rep.fail([h.names[v], h.names[w], h.names[u]],
                                    "V nested in W and W orth U but V not orth U")
    rep.record(h.radius, orthogonal_pairs=int(sum(h.orth(i, j) for i, j in combinations(act, 2))))


def _transversality(h, rep, budget, rng):
    act = h.active()
    worst = 0
    for i, j in combinations(act, 2):
        if not h.trans(i, j):
            continue
        for a, b in ((i, j), (j, i)):
            arr = h.rho_up.get((a, b))
            if arr is None or len(arr) == 0:
                return rep.fail([h.names[a], h.names[b]], "missing rho for transverse pair")
            dmax = _set_diam(h, b, arr)
            worst = max(worst, dmax)
            if dmax > h.ticks(b, h.E):
                return rep.fail([h.names[a], h.names[b]], "rho set too large")
    rep.record(h.radius, max_rho_diameter=worst)


def _complexity(h, rep, budget, rng):
    c = h.chains()
    rep.record(h.radius, longest_chain=c)
    if c > Fraction(h.E):
        rep.fail({"chain_length": c}, "nesting chain longer than E")


def _containers(h, rep, budget, rng):
    act = h.active()
    for w in act:
        below = h.below(w)
        for u in below:
            need = [v for v in below if h.orth(v, u)]
            if not need:
                continue
            ok = [q for q in below if q != w and all(h.nested_eq(v, q) for v in need)]
            if not ok:
                return rep.fail([h.names[w], h.names[u]], "no proper container")
    rep.record(h.radius, checked=True)


# ---------------------------------------------------------------- (7)

def _uniqueness(h, rep, budget, rng):
    """Fit theta(r) = 1 + max{d_X(x,y) : max_W d_W(x,y) < r} on integer r."""
    X = h.ambient
    act = h.active()
    n = X.n
    rows = np.arange(n) if n * n <= budget * 4 else np.sort(rng.choice(n, size=max(1, (budget * 4) // n), replace=False))
    r_max = int(max(Fraction(h.diam(i)) for i in act)) + 1
    dX_rows = X.dist_rows(rows)
    theta = {}
    # maximum projection distance per pair, in units of length (domains share unit ticks here)
    mx = np.zeros((len(rows), n), dtype=np.float64)
    for i in act:
        g = h.domains[i].graph
        P = h.proj[i]
        mx = np.maximum(mx, h.dm(i)[P[rows]][:, P] / g.scale)
    dXu = dX_rows / X.scale
    for r in range(1, r_max + 1):
        sel = mx < r
        val = dXu[sel].max() if sel.any() else 0
        theta[r] = Fraction(val).limit_denominator(X.scale) + 1
    E = Fraction(h.E)
    rep.record(h.radius, theta={str(r): t for r, t in theta.items()}, rows_exhaustive=len(rows) == n)
    for r, t in theta.items():
        if t > E * r + E:
            sel = mx < r
            k = np.flatnonzero(sel.ravel())[np.argmax(dXu[sel])]
            a, b = divmod(int(k), n)
            return rep.fail({"r": r, "theta": t, "x": _vlabel(h, int(rows[a])), "y": _vlabel(h, b)},
                            "theta(r) exceeds E r + E")


# ---------------------------------------------------------------- (8)

def _bgi(h, rep, budget, rng):
    act = h.active()
    worst = 0
    checked = 0
    for w in act:
        subs = [v for v in act if h.nested(v, w)]
        if not subs:
            continue
        gW = h.domains[w].graph
        m = gW.n
        Ew = h.ticks(w, h.E)
        # budget counts (source, subdomain) pairs; each costs one tree sweep
        per = max(1, budget // len(subs))
        sources = np.arange(m) if m <= per else np.sort(rng.choice(m, size=per, replace=False))
        far = {}
        for v in subs:
            far[v] = _set_dist(h, w, h.rho_up[(v, w)]) > Ew
        for a in sources.tolist():
            parent, order, levels = gW.geodesic_tree(a)
            for v in subs:
                if not far[v][a]:
                    continue
                table = h.rho_down[(v, w)]
                gV = h.domains[v].graph
                DV = h.dm(v)
                allfar = np.zeros(m, bool)
                allfar[a] = True
                for lvl in levels[1:]:
                    allfar[lvl] = allfar[parent[lvl]] & far[v][lvl]
                targets = np.flatnonzero(allfar)
                checked += len(targets)
                if gV.n <= 64:
                    mask = np.zeros(m, dtype=np.uint64)
                    mask[a] = np.uint64(1) << np.uint64(table[a])
                    for lvl in levels[1:]:
                        mask[lvl] = mask[parent[lvl]] | (np.uint64(1) << table[lvl].astype(np.uint64))
                    for mk in np.unique(mask[targets]).tolist():
                        members = [b for b in range(gV.n) if (int(mk) >> b) & 1]
                        dmx = int(DV[np.ix_(members, members)].max())
                        worst = max(worst, dmx)
                        if dmx > h.ticks(v, h.E):
                            b = int(targets[np.flatnonzero(mask[targets] == mk)[0]])
                            return rep.fail({"V": h.names[v], "W": h.names[w], "geodesic": [a, b]},
                                            "geodesic image too large")
                else:
                    for b in targets.tolist():
                        path = gW.geodesic(a, b).vertices
                        dmx = _set_diam(h, v, table[list(path)])
                        worst = max(worst, dmx)
                        if dmx > h.ticks(v, h.E):
                            return rep.fail({"V": h.names[v], "W": h.names[w], "geodesic": [a, b]},
                                            "geodesic image too large")
    rep.record(h.radius, max_image_diameter=worst, geodesics_checked=checked)


# ---------------------------------------------------------------- (9)

def _min_cover(h, big, cands, bound):
    """Smallest number of candidates covering big (exact up to size bound)."""
    cover = {c: {u for u in big if h.nested_eq(u, c)} for c in cands}
    cover = {c: s for c, s in cover.items() if s}
    need = set(big)
    # greedy upper bound
    greedy, left = 0, set(need)
    while left:
        c = max(cover, key=lambda c: (len(cover[c] & left), -c))
        left -= cover[c]
        greedy += 1
    if greedy <= bound:
        return greedy
    keys = sorted(cover)
    for size in range(1, int(bound) + 1):
        for combo in combinations(keys, size):
            if set().union(*(cover[c] for c in combo)) >= need:
                return size
    return greedy


def _large_links(h, rep, budget, rng):
    X = h.ambient
    act = h.active()
    E = Fraction(h.E)
    xs, ys, exhaustive = _pairs(X.n, max(1, budget // max(1, len(act))), rng)
    worst = Fraction(-10**9)
    for w in act:
        subs = [u for u in act if h.nested(u, w)]
        if not subs:
            continue
        gW = h.domains[w].graph
        dW = h.dm(w)[h.proj[w][xs], h.proj[w][ys]]
        counts = np.zeros(len(xs), dtype=np.int64)
        bigmat = np.zeros((len(subs), len(xs)), bool)
        for k, u in enumerate(subs):
            du = h.dm(u)[h.proj[u][xs], h.proj[u][ys]]
            bigmat[k] = du > h.ticks(u, E)
            counts += bigmat[k]
        for idx in np.flatnonzero(counts > 0).tolist():
            bnd = E * Fraction(int(dW[idx]), gW.scale) + E
            if counts[idx] <= bnd:
                worst = max(worst, counts[idx] - bnd)
                continue
            big = [subs[k] for k in np.flatnonzero(bigmat[:, idx])]
            m = _min_cover(h, big, subs, bnd)
            worst = max(worst, m - bnd)
            if m > bnd:
                return rep.fail({"W": h.names[w], "x": _vlabel(h, int(xs[idx])), "y": _vlabel(h, int(ys[idx])),
                                 "m": m, "bound": bnd}, "too many large links")
    rep.record(h.radius, max_excess=worst if worst > -10**9 else 0, pairs_exhaustive=exhaustive)


# ---------------------------------------------------------------- (10)

def _consistency(h, rep, budget, rng):
    act = h.active()
    X = h.ambient
    worst = 0
    for i, j in combinations(act, 2):
        if h.trans(i, j):
            a = _set_dist(h, j, h.rho_up[(i, j)])[h.proj[j]]
            b = _set_dist(h, i, h.rho_up[(j, i)])[h.proj[i]]
            ok = (a <= h.ticks(j, h.E)) | (b <= h.ticks(i, h.E))
            term = np.minimum(a, b)
            worst = max(worst, int(term.max()))
            if not ok.all():
                x = int(np.argmax(np.where(ok, -1, term)))
                return rep.fail({"kind": "transverse", "V": h.names[i], "W": h.names[j], "x": _vlabel(h, x)},
                                "transverse consistency fails")
    for v in act:
        for w in act:
            if not h.nested(v, w):
                continue
            near = _set_dist(h, w, h.rho_up[(v, w)])[h.proj[w]]
            img = h.rho_down[(v, w)][h.proj[w]]
            dv = h.dm(v)[h.proj[v], img]
            ok = (near <= h.ticks(w, h.E)) | (dv <= h.ticks(v, h.E))
            term = np.minimum(near, dv)
            worst = max(worst, int(term.max()))
            if not ok.all():
                x = int(np.argmax(np.where(ok, -1, term)))
                return rep.fail({"kind": "nested", "V": h.names[v], "W": h.names[w], "x": _vlabel(h, x)},
                                "nested consistency fails")
    for u in act:
        for v in act:
            if u == v or not h.nested(u, v):
                continue
            for w in act:
                if w in (u, v) or h.orth(w, u):
                    continue
                if not (h.nested(v, w) or h.trans(v, w)):
                    continue
                if (u, w) not in h.rho_up:
                    continue
                A, B = h.rho_up[(u, w)], h.rho_up[(v, w)]
                dd = int(h.dm(w)[np.ix_(A, B)].min())
                worst = max(worst, dd)
                if dd > h.ticks(w, h.E):
                    return rep.fail({"kind": "rho", "U": h.names[u], "V": h.names[v], "W": h.names[w]},
                                    "rho sets of nested domains disagree")
    rep.record(h.radius, max_min_term=worst, vertices=X.n)


# ---------------------------------------------------------------- (11)

def orthogonal_families(h: HhsStructure, max_size: int | None = None):
    act = h.active()
    out = []

    def grow(fam, start):
        out.append(tuple(fam))
        if max_size is not None and len(fam) >= max_size:
            return
        for k in range(start, len(act)):
            c = act[k]
            if all(h.orth(c, f) for f in fam):
                grow(fam + [c], k + 1)

    for k, c in enumerate(act):
        grow([c], k + 1)
    return out


def _partial_realization(h, rep, budget, rng):
    X = h.ambient
    act = h.active()
    E = Fraction(h.E)
    r_in = max(Fraction(h.radius) - 2 * E, Fraction(0))
    fams = orthogonal_families(h, max_size=int(E))
    tested = 0
    for fam in fams:
        k = len(fam)
        per = r_in / k
        cond2 = np.ones(X.n, bool)
        for vi in fam:
            for w in act:
                if h.nested(vi, w) or h.trans(w, vi):
                    cond2 &= _set_dist(h, w, h.rho_up[(vi, w)])[h.proj[w]] <= h.ticks(w, E)
        targets = []
        for vi in fam:
            base = h.pi(vi, X.basepoint)
            d0 = h.dm(vi)[base]
            targets.append(np.flatnonzero(d0 <= h.ticks(vi, per)))
        oks = [h.dm(vi)[targets[t]][:, h.proj[vi]] <= h.ticks(vi, E) for t, vi in enumerate(fam)]
        total = int(np.prod([len(t) for t in targets]))
        if total > budget:
            combos = [tuple(int(rng.integers(len(t))) for t in targets) for _ in range(budget)]
        else:
            combos = None
        if k == 1:
            good = (oks[0] & cond2[None, :]).any(axis=1)
            tested += len(good)
            if not good.all():
                p = int(targets[0][np.flatnonzero(~good)[0]])
                return rep.fail({"family": [h.names[fam[0]]], "points": [p]}, "no realization point")
            continue
        if combos is None:
            grids = np.meshgrid(*[np.arange(len(t)) for t in targets], indexing="ij")
            combos = list(zip(*[g.ravel().tolist() for g in grids]))
        for combo in combos:
            tested += 1
            m = cond2.copy()
            for t, c in enumerate(combo):
                m &= oks[t][c]
            if not m.any():
                pts = [int(targets[t][c]) for t, c in enumerate(combo)]
                return rep.fail({"family": [h.names[f] for f in fam], "points": pts}, "no realization point")
    rep.record(h.radius, families=len(fams), tuples=tested, inner_radius=r_in)
    rep.notes.append(f"checked on the inner ball: targets within {r_in} (split across the family) of pi(x0)")
