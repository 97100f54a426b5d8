"""Finite weighted graphs as metric spaces.

Distances are exact. Internally every length is an integer number of ticks,
where one unit of length is ``scale`` ticks and ``scale`` is the lcm of the
edge-length denominators. Cone cliques (sets of vertices pairwise joined by
length-1 edges) are stored implicitly and expanded through hub vertices when
distances are computed.
"""
from __future__ import annotations

import json
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

Length = "int | Fraction"

UNREACHABLE = np.iinfo(np.int64).max // 4
FULL_MATRIX_LIMIT = 3000
ROW_CACHE_SIZE = 1024
TREE_CACHE_SIZE = 256
EXHAUSTIVE_DELTA_LIMIT = 400
# sampled triples on graphs above FULL_MATRIX_LIMIT (one search per triangle side)
ROW_DELTA_LIMIT = 2_000


class GraphError(ValueError):
    """Structurally invalid graph or query."""


def as_length(value) -> int | Fraction:
    """Normalize a rational to int when integral."""
    f = Fraction(value)
    return f.numerator if f.denominator == 1 else f


def length_str(value) -> str:
    f = Fraction(value)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


@dataclass(frozen=True)
class Geodesic:
    vertices: tuple
    length: object

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class QgFit:
    K_off: object
    K_back: object
    K_gap: object

    def max(self):
        return max(self.K_off, self.K_back, self.K_gap)


class MetricGraph:
    """Immutable connected graph with positive rational edge lengths."""

    def __init__(self, n: int, edges: Iterable = (), basepoint: int = 0,
                 labels: Sequence[str] | None = None,
                 cliques: Iterable = (), check_connected: bool = True):
        n = int(n)
        if n < 1:
            raise GraphError("graph needs at least one vertex")
        self.n = n
        clean = []
        seen = set()
        for e in edges:
            if len(e) == 2:
                u, v, w = int(e[0]), int(e[1]), Fraction(1)
            else:
                u, v, w = int(e[0]), int(e[1]), Fraction(e[2])
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u},{v}) out of range")
            if w <= 0:
                raise GraphError(f"non-positive length on edge ({u},{v})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
            clean.append((key[0], key[1], w))
        clean.sort(key=lambda t: (t[0], t[1]))
        self.edges = tuple(clean)
        cl = []
        for c in cliques:
            if isinstance(c, dict):
                members, tag = c["members"], c.get("tag")
            elif len(c) == 2 and not isinstance(c[1], (int, np.integer)):
                members, tag = c
            else:
                members, tag = c, None
            m = tuple(sorted({int(x) for x in members}))
            if any(not 0 <= x < n for x in m):
                raise GraphError("clique member out of range")
            if len(m) >= 2:
                cl.append((m, tag))
        self.cliques = tuple(cl)
        if not 0 <= int(basepoint) < n:
            raise GraphError("basepoint out of range")
        self.basepoint = int(basepoint)
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != n:
                raise GraphError("label count does not match vertex count")
        self.labels = labels
        dens = [w.denominator for _, _, w in self.edges]
        self.scale = math.lcm(*dens) if dens else 1
        self.uniform = all(w == 1 for _, _, w in self.edges)
        self._lock = threading.Lock()
        self._rows: OrderedDict = OrderedDict()
        self._trees: OrderedDict = OrderedDict()
        self._full = None
        self._build_kernel()
        self._label_index = None
        if check_connected and n > 1:
            row = self.dist_row(self.basepoint)
            if (row >= UNREACHABLE).any():
                bad = int(np.flatnonzero(row >= UNREACHABLE)[0])
                raise GraphError(f"graph is disconnected (vertex {bad} unreachable)")

    # ------------------------------------------------------------ kernel
    def _build_kernel(self):
        n = self.n
        nc = len(self.cliques)
        k = 2 if nc else 1
        rows, cols, wts = [], [], []
        for u, v, w in self.edges:
            t = int(w * self.scale) * k
            rows += [u, v]
            cols += [v, u]
            wts += [t, t]
        half = self.scale  # hub edge = half a unit, in doubled ticks
        for i, (m, _) in enumerate(self.cliques):
            h = n + i
            for x in m:
                rows += [x, h]
                cols += [h, x]
                wts += [half, half]
        self._k = k
        size = n + nc
        self._aug = csr_matrix((np.asarray(wts, dtype=float), (rows, cols)), shape=(size, size))
        adj = [[] for _ in range(n)]
        wadj = [[] for _ in range(n)]
        for u, v, w in self.edges:
            t = int(w * self.scale)
            adj[u].append(v)
            adj[v].append(u)
            wadj[u].append(t)
            wadj[v].append(t)
        self._adj = [np.asarray(a, dtype=np.int64) for a in adj]
        self._wadj = [np.asarray(a, dtype=np.int64) for a in wadj]
        vc = [[] for _ in range(n)]
        for i, (m, _) in enumerate(self.cliques):
            for x in m:
                vc[x].append(i)
        self._vcliques = [tuple(c) for c in vc]
        src = np.asarray([u for u, v, _ in self.edges] + [v for u, v, _ in self.edges], dtype=np.int64)
        dst = np.asarray([v for u, v, _ in self.edges] + [u for u, v, _ in self.edges], dtype=np.int64)
        self._dir_edges = (src, dst)
        mv = [x for m, _ in self.cliques for x in m]
        mc = [i for i, (m, _) in enumerate(self.cliques) for _ in m]
        self._membership = (np.asarray(mv, dtype=np.int64), np.asarray(mc, dtype=np.int64))
        self._cmembers = [np.asarray(m, dtype=np.int64) for m, _ in self.cliques]

    def _compute_rows(self, sources):
        src = np.asarray(sources, dtype=np.int64)
        unweighted = self.uniform and not self.cliques
        d = dijkstra(self._aug, directed=False, indices=src, unweighted=unweighted)
        d = d[:, : self.n]
        out = np.full(d.shape, UNREACHABLE, dtype=np.int64)
        fin = np.isfinite(d)
        out[fin] = np.rint(d[fin]).astype(np.int64) // self._k
        return out

    def distance_matrix(self) -> np.ndarray:
        """All-pairs distances in ticks (only for small graphs)."""
        if self.n > FULL_MATRIX_LIMIT:
            raise GraphError("graph too large for a full distance matrix")
        with self._lock:
            if self._full is None:
                full = self._compute_rows(np.arange(self.n))
                full.setflags(write=False)
                self._full = full
            return self._full

    def dist_row(self, x: int) -> np.ndarray:
        """Distances in ticks from x to every vertex."""
        x = self._check_vertex(x)
        if self._full is not None:
            return self._full[x]
        with self._lock:
            row = self._rows.get(x)
            if row is not None:
                self._rows.move_to_end(x)
                return row
        row = self._compute_rows([x])[0]
        row.setflags(write=False)
        with self._lock:
            self._rows[x] = row
            while len(self._rows) > ROW_CACHE_SIZE:
                self._rows.popitem(last=False)
        return row

    def dist_rows(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        if self._full is not None or self.n <= 400:
            return self.distance_matrix()[xs]
        if not len(xs):
            return np.zeros((0, self.n), np.int64)
        uniq = list(dict.fromkeys(xs.tolist()))
        if len(uniq) > ROW_CACHE_SIZE and self.n <= FULL_MATRIX_LIMIT:
            return self.distance_matrix()[xs]
        with self._lock:
            have = {x: self._rows[x] for x in uniq if x in self._rows}
        missing = [x for x in uniq if x not in have]
        if missing:
            rows = self._compute_rows(missing)
            with self._lock:
                for x, r in zip(missing, rows):
                    r.setflags(write=False)
                    have[x] = r
                    self._rows[x] = r
                while len(self._rows) > ROW_CACHE_SIZE:
                    self._rows.popitem(last=False)
        return np.stack([have[int(x)] for x in xs])

    def multi_source_row(self, sources) -> np.ndarray:
        """Distance in ticks from every vertex to the set ``sources``."""
        src = sorted({int(s) for s in sources})
        if not src:
            raise GraphError("empty vertex set")
        if self._full is not None or self.n <= 400:
            return self.distance_matrix()[src].min(axis=0)
        unweighted = self.uniform and not self.cliques
        d = dijkstra(self._aug, directed=False, indices=src, unweighted=unweighted,
                     min_only=True)[: self.n]
        out = np.full(self.n, UNREACHABLE, dtype=np.int64)
        fin = np.isfinite(d)
        out[fin] = np.rint(d[fin]).astype(np.int64) // self._k
        return out

    def _check_vertex(self, x) -> int:
        x = int(x)
        if not 0 <= x < self.n:
            raise GraphError(f"vertex {x} not in graph")
        return x

    # ------------------------------------------------------------ structure
    def neighbors(self, u: int) -> np.ndarray:
        u = self._check_vertex(u)
        parts = [self._adj[u]] + [self._cmembers[c] for c in self._vcliques[u]]
        nb = np.unique(np.concatenate(parts)) if len(parts) > 1 else self._adj[u]
        return nb[nb != u]

    def edge_ticks(self, u: int, v: int) -> int:
        """Length in ticks of the shortest direct edge u-v (cone edges count 1)."""
        best = UNREACHABLE
        hit = self._adj[u] == v
        if hit.any():
            best = int(self._wadj[u][hit].min())
        if set(self._vcliques[u]) & set(self._vcliques[v]):
            best = min(best, self.scale)
        return best

    def ticks(self, value) -> int:
        """Convert a length to ticks (exact)."""
        t = Fraction(value) * self.scale
        if t.denominator != 1:
            raise GraphError(f"length {value} is not a multiple of 1/{self.scale}")
        return int(t)

    def ticks_floor(self, value) -> int:
        return math.floor(Fraction(value) * self.scale)

    def length(self, ticks) -> int | Fraction:
        return as_length(Fraction(int(ticks), self.scale))

    def vertex_of(self, label: str) -> int:
        if self.labels is None:
            raise GraphError("graph has no labels")
        if self._label_index is None:
            self._label_index = {s: i for i, s in enumerate(self.labels)}
        try:
            return self._label_index[label]
        except KeyError:
            raise GraphError(f"no vertex labelled {label!r}") from None

    def eccentricity(self, x=None) -> int | Fraction:
        x = self.basepoint if x is None else x
        return self.length(int(self.dist_row(x).max()))

    def diameter(self) -> int | Fraction:
        if self.n == 1:
            return 0
        if self.n <= FULL_MATRIX_LIMIT:
            return self.length(int(self.distance_matrix().max()))
        # double sweep lower bound refined by eccentricities of extremal vertices
        best = 0
        x = self.basepoint
        for _ in range(4):
            row = self.dist_row(x)
            y = int(np.argmax(row))
            best = max(best, int(row[y]))
            x = y
        return self.length(best)

    def set_diameter_ticks(self, vertices) -> int:
        vs = sorted({int(v) for v in vertices})
        if len(vs) <= 1:
            return 0
        rows = self.dist_rows(vs)
        return int(rows[:, vs].max())

    # ------------------------------------------------------------ geodesics
    def geodesic_tree(self, x: int):
        """Lexicographically least geodesics from x, as a parent array and levels.

        The lex-least geodesic from x to y has the lex-least geodesic from x to
        every intermediate vertex as a prefix, so these paths form a tree.
        Returns (parent, order) where order lists reachable vertices by
        increasing distance.
        """
        x = self._check_vertex(x)
        with self._lock:
            hit = self._trees.get(x)
            if hit is not None:
                self._trees.move_to_end(x)
                return hit
        d = self.dist_row(x)
        if self.uniform:
            tree = self._tree_uniform(x, d)
        else:
            tree = self._tree_general(x, d)
        with self._lock:
            self._trees[x] = tree
            while len(self._trees) > TREE_CACHE_SIZE:
                self._trees.popitem(last=False)
        return tree

    def _tree_uniform(self, x, d):
        n = self.n
        parent = np.full(n, -1, dtype=np.int64)
        rank = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        reach = np.flatnonzero(d < UNREACHABLE)
        order = reach[np.lexsort((reach, d[reach]))]
        bounds = np.flatnonzero(np.diff(d[order])) + 1
        levels = np.split(order, bounds)
        src, dst = self._dir_edges
        pred = d[src] + 1 == d[dst]
        psrc, pdst = src[pred], dst[pred]
        pl = d[pdst]
        mv, mc = self._membership
        big = np.iinfo(np.int64).max
        rank[x] = 0
        nxt = 1
        for L in range(1, len(levels)):
            level = levels[L]
            best_r = np.full(n, big, dtype=np.int64)
            best_u = np.full(n, -1, dtype=np.int64)
            sel = pl == L
            if sel.any():
                s_, t_ = psrc[sel], pdst[sel]
                o = np.lexsort((rank[s_], t_))
                t_s, s_s = t_[o], s_[o]
                first = np.ones(len(t_s), bool)
                first[1:] = t_s[1:] != t_s[:-1]
                best_r[t_s[first]] = rank[s_s[first]]
                best_u[t_s[first]] = s_s[first]
            if len(mv):
                at_prev = d[mv] == L - 1
                if at_prev.any():
                    cv, cc = mv[at_prev], mc[at_prev]
                    o = np.lexsort((rank[cv], cc))
                    cc_s, cv_s = cc[o], cv[o]
                    first = np.ones(len(cc_s), bool)
                    first[1:] = cc_s[1:] != cc_s[:-1]
                    crank = np.full(len(self.cliques), big, dtype=np.int64)
                    cbest = np.full(len(self.cliques), -1, dtype=np.int64)
                    crank[cc_s[first]] = rank[cv_s[first]]
                    cbest[cc_s[first]] = cv_s[first]
                    at_l = d[mv] == L
                    yv, yc = mv[at_l], mc[at_l]
                    cand_r = crank[yc]
                    ok = cand_r < big
                    yv, yc, cand_r = yv[ok], yc[ok], cand_r[ok]
                    if len(yv):
                        o = np.lexsort((cand_r, yv))
                        yv_s, yc_s = yv[o], yc[o]
                        first = np.ones(len(yv_s), bool)
                        first[1:] = yv_s[1:] != yv_s[:-1]
                        yv_f, r_f = yv_s[first], crank[yc_s[first]]
                        better = r_f < best_r[yv_f]
                        best_r[yv_f[better]] = r_f[better]
                        best_u[yv_f[better]] = cbest[yc_s[first][better]]
            parent[level] = best_u[level]
            o = np.lexsort((level, best_r[level]))
            rank[level[o]] = np.arange(nxt, nxt + len(level))
            nxt += len(level)
        parent.setflags(write=False)
        return parent, order, levels

    def _tree_general(self, x, d):
        n = self.n
        parent = np.full(n, -1, dtype=np.int64)
        reach = np.flatnonzero(d < UNREACHABLE)
        order = reach[np.lexsort((reach, d[reach]))]
        paths = {x: (x,)}
        for y in order.tolist():
            if y == x:
                continue
            best = None
            bu = -1
            for u, w in zip(self._adj[y].tolist(), self._wadj[y].tolist()):
                if d[u] + w == d[y]:
                    cand = paths[u]
                    if best is None or cand < best:
                        best, bu = cand, u
            for c in self._vcliques[y]:
                for u in self._cmembers[c].tolist():
                    if u != y and d[u] + self.scale == d[y]:
                        cand = paths[u]
                        if best is None or cand < best:
                            best, bu = cand, u
            parent[y] = bu
            paths[y] = best + (y,)
        parent.setflags(write=False)
        return parent, order, _topological_levels(parent, order)

    def geodesic(self, x: int, y: int) -> Geodesic:
        x = self._check_vertex(x)
        y = self._check_vertex(y)
        if x == y:
            return Geodesic((x,), 0)
        d = self.dist_row(x)
        if d[y] >= UNREACHABLE:
            raise GraphError("unreachable")
        parent = self.geodesic_tree(x)[0]
        path = [y]
        while path[-1] != x:
            path.append(int(parent[path[-1]]))
        path.reverse()
        return Geodesic(tuple(path), self.length(int(d[y])))

    # ------------------------------------------------------------ io
    def to_dict(self) -> dict:
        out = {
            "vertices": self.n,
            "basepoint": self.basepoint,
            "edges": [[u, v, length_str(w)] for u, v, w in self.edges],
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.cliques:
            out["cliques"] = [{"members": list(m), "tag": t} for m, t in self.cliques]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricGraph":
        for key in ("vertices", "edges", "basepoint"):
            if key not in data:
                raise GraphError(f"graph file missing field {key!r}")
        edges = []
        for e in data["edges"]:
            if len(e) == 2:
                edges.append((e[0], e[1], 1))
            else:
                edges.append((e[0], e[1], Fraction(str(e[2]))))
        return cls(data["vertices"], edges, data["basepoint"], data.get("labels"),
                   [(c["members"], _tag_in(c.get("tag"))) for c in data.get("cliques", [])])

    def dumps(self) -> str:
        return dumps_canonical(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "MetricGraph":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "MetricGraph":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())

    def with_cliques(self, cliques) -> "MetricGraph":
        """Same graph plus extra cone cliques."""
        g = MetricGraph(self.n, self.edges, self.basepoint, self.labels,
                        list(self.cliques) + list(cliques), check_connected=False)
        return g

    def __repr__(self):
        return f"MetricGraph(n={self.n}, edges={len(self.edges)}, cliques={len(self.cliques)})"


def _tag_in(tag):
    return tuple(tag) if isinstance(tag, list) else tag


def _topological_levels(parent, order):
    depth = {}
    levels = {}
    for y in order.tolist():
        p = int(parent[y])
        dy = 0 if p < 0 else depth[p] + 1
        depth[y] = dy
        levels.setdefault(dy, []).append(y)
    return [np.asarray(levels[k], dtype=np.int64) for k in sorted(levels)]


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n"


# ---------------------------------------------------------------- operations

def distance(g: MetricGraph, x: int, y: int):
    t = int(g.dist_row(x)[g._check_vertex(y)])
    if t >= UNREACHABLE:
        raise GraphError("unreachable")
    return g.length(t)


def geodesic(g: MetricGraph, x: int, y: int) -> Geodesic:
    return g.geodesic(x, y)


def gromov_product(g: MetricGraph, x: int, y: int, z: int):
    """<x,y>_z = (d(x,z) + d(y,z) - d(x,y)) / 2."""
    dz = g.dist_row(z)
    dxy = int(g.dist_row(x)[y])
    return as_length(Fraction(int(dz[x]) + int(dz[y]) - dxy, 2 * g.scale))


def doubled_products(g: MetricGraph, h: int, z: int | None = None) -> np.ndarray:
    """2<h,x>_z in ticks for every vertex x."""
    z = g.basepoint if z is None else z
    dz = g.dist_row(z)
    dh = g.dist_row(h)
    return dz[h] + dz - dh


def _compact(D: np.ndarray) -> np.ndarray:
    """Narrowest integer dtype that keeps sums of three distances exact."""
    top = int(D.max()) if D.size else 0
    if 3 * top < np.iinfo(np.int16).max:
        return D.astype(np.int16)
    if 3 * top < np.iinfo(np.int32).max:
        return D.astype(np.int32)
    return D


def _path_dist_tables(g: MetricGraph, a: int, D: np.ndarray):
    """M[c, v] = d(v, geodesic(a, c)) for all c, v (ticks)."""
    parent, order, levels = g.geodesic_tree(a)
    M = np.empty_like(D)
    M[a] = D[a]
    for lvl in levels[1:]:
        M[lvl] = np.minimum(M[parent[lvl]], D[lvl])
    return M


@dataclass(frozen=True)
class DeltaEstimate:
    delta: object
    exhaustive: bool
    triples: int
    witness: tuple | None


def _triangle_defect(g, D, a, b, c):
    pab = list(g.geodesic(min(a, b), max(a, b)).vertices)
    pac = list(g.geodesic(min(a, c), max(a, c)).vertices)
    pbc = list(g.geodesic(min(b, c), max(b, c)).vertices)
    best = 0
    for side, o1, o2 in ((pab, pac, pbc), (pac, pab, pbc), (pbc, pab, pac)):
        sub = D[np.ix_(side, o1 + o2)]
        best = max(best, int(sub.min(axis=1).max()))
    return best


def estimate_delta(g: MetricGraph, sample_budget: int = 200_000, seed: int = 0) -> DeltaEstimate:
    """Thin-triangle hyperbolicity constant over all or sampled triples.

    Each unordered triple a<b<c uses the sides geodesic(min, max); the defect is
    the largest distance from a side vertex to the union of the other sides.
    Graphs above FULL_MATRIX_LIMIT are sampled, at most ROW_DELTA_LIMIT triples.
    """
    n = g.n
    total = n * (n - 1) * (n - 2) // 6
    if n < 3:
        return DeltaEstimate(0, True, total, None)
    rng = np.random.default_rng(seed)
    count = min(sample_budget, total)
    if n > FULL_MATRIX_LIMIT:
        count = min(count, ROW_DELTA_LIMIT)
        tri = _sample_triples(rng, n, count)
        best, k = _delta_rows(g, tri)
        return DeltaEstimate(g.length(best), False, count, tuple(int(v) for v in tri[k]))
    D = g.distance_matrix()
    # the exhaustive sweep costs one vectorized pass per vertex pair
    if n <= EXHAUSTIVE_DELTA_LIMIT and n * (n - 1) // 2 <= sample_budget:
        return _delta_exhaustive(g, _compact(D), total)
    tri = np.sort(np.stack([rng.choice(n, size=3, replace=False) for _ in range(count)]), axis=1) \
        if count <= 5_000 else _sample_triples(rng, n, count)
    best, k = _delta_batch(g, D, tri)
    return DeltaEstimate(g.length(best), False, count, tuple(int(v) for v in tri[k]))


def _sample_triples(rng, n, count):
    tri = rng.integers(0, n, size=(count * 2, 3))
    ok = (tri[:, 0] != tri[:, 1]) & (tri[:, 1] != tri[:, 2]) & (tri[:, 0] != tri[:, 2])
    tri = tri[ok][:count]
    while len(tri) < count:
        tri = np.concatenate([tri, _sample_triples(rng, n, count - len(tri))])
    return np.sort(tri, axis=1)


def _walk(parents: dict, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vertices of geodesic(s, t) for each row, padded by repeating s."""
    out = [t]
    cur = t.copy()
    P = np.stack([parents[int(v)] for v in s]) if len(s) else np.zeros((0, 0), np.int64)
    rows = np.arange(len(s))
    while True:
        done = cur == s
        if done.all():
            break
        cur = np.where(done, cur, P[rows, cur])
        out.append(cur.copy())
    return np.stack(out, axis=1)


def _delta_batch(g, D, tri, chunk: int = 4096):
    """Largest thin-triangle defect over rows (a<b<c) with canonical sides."""
    sources = np.unique(tri[:, :2])
    parents = {int(v): g.geodesic_tree(int(v))[0] for v in sources}
    best, arg = -1, 0
    for s0 in range(0, len(tri), chunk):
        a, b, c = tri[s0:s0 + chunk].T
        sides = [_walk(parents, a, b), _walk(parents, a, c), _walk(parents, b, c)]
        vals = np.zeros(len(a), dtype=np.int64)
        for k in range(3):
            side = sides[k]
            rest = np.concatenate([sides[j] for j in range(3) if j != k], axis=1)
            sub = D[side[:, :, None], rest[:, None, :]]
            vals = np.maximum(vals, sub.min(axis=2).max(axis=1))
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, arg = int(vals[k]), s0 + k
    return best, arg


def _delta_rows(g, tri):
    """Same defect as _delta_batch, one multi-source search per side (large graphs)."""
    best, arg = -1, 0
    for k, (a, b, c) in enumerate(tri.tolist()):
        sides = [list(g.geodesic(a, b).vertices), list(g.geodesic(a, c).vertices),
                 list(g.geodesic(b, c).vertices)]
        val = 0
        for i in range(3):
            rest = [v for j in range(3) if j != i for v in sides[j]]
            val = max(val, int(g.multi_source_row(rest)[sides[i]].max()))
        if val > best:
            best, arg = val, k
    return best, arg


def _delta_exhaustive(g, D, total):
    n = g.n
    G = np.empty((n, n, n), dtype=D.dtype)
    for a in range(n):
        M = _path_dist_tables(g, a, D)
        G[a, a:] = M[a:]
        G[a:, a] = M[a:]
    best, wit = 0, None
    for a in range(n):
        for b in range(a + 1, n):
            P = list(g.geodesic(a, b).vertices)
            vals = np.minimum(G[a][:, P], G[b][:, P]).max(axis=1)
            vals[[a, b]] = 0
            c = int(np.argmax(vals))
            if vals[c] > best:
                best, wit = int(vals[c]), tuple(sorted((a, b, c)))
    return DeltaEstimate(g.length(best), True, total, wit)


def gromov_gap(g: MetricGraph, sample_budget: int | None = None, seed: int = 0):
    """max |<x,y>_z - d(z, geodesic(x,y))| over pairs x<y and all z.

    Exhaustive when sample_budget is None; returns (gap, witness).
    """
    D = _compact(g.distance_matrix())
    n = g.n
    best, wit = 0, None
    sources = range(n)
    if sample_budget is not None and n * n * n > sample_budget:
        rng = np.random.default_rng(seed)
        k = max(1, sample_budget // (n * n))
        sources = sorted(rng.choice(n, size=min(n, k), replace=False).tolist())
    for a in sources:
        M = _path_dist_tables(g, a, D)
        bs = np.arange(a + 1, n)
        if not len(bs):
            continue
        twice = D[a][None, :] + D[bs] - D[a, bs][:, None]
        gap = np.abs(twice - 2 * M[bs])
        i = int(np.argmax(gap))
        val = int(gap.flat[i])
        if val > best:
            bi, z = divmod(i, n)
            best, wit = val, (a, int(bs[bi]), z)
    return as_length(Fraction(best, 2 * g.scale)), wit


def is_quasiconvex(g: MetricGraph, Y, mu) -> tuple[bool, tuple | None]:
    """Every geodesic between points of Y stays in the mu-neighborhood of Y.

    Witness on failure: (a, b, v) with v on geodesic(a, b) far from Y.
    """
    Ys = sorted({int(y) for y in Y})
    if not Ys:
        raise GraphError("empty vertex set")
    lim = g.ticks_floor(mu)
    dY = g.multi_source_row(Ys)
    inY = np.zeros(g.n, bool)
    inY[Ys] = True
    if (dY <= lim).all():
        return True, None
    for a in Ys:
        parent, order, levels = g.geodesic_tree(a)
        val = np.empty(g.n, dtype=np.int64)
        val[a] = dY[a]
        for lvl in levels[1:]:
            val[lvl] = np.maximum(val[parent[lvl]], dY[lvl])
        bad = [b for b in Ys if val[b] > lim]
        if bad:
            b = bad[0]
            path = g.geodesic(a, b).vertices
            v = next(p for p in path if dY[p] > lim)
            return False, (a, b, v)
    return True, None


def quasiconvexity_constant(g: MetricGraph, Y):
    """Smallest mu for which Y is mu-quasiconvex under the computed geodesics."""
    Ys = sorted({int(y) for y in Y})
    dY = g.multi_source_row(Ys)
    best = 0
    for a in Ys:
        parent, order, levels = g.geodesic_tree(a)
        val = np.empty(g.n, dtype=np.int64)
        val[a] = dY[a]
        for lvl in levels[1:]:
            val[lvl] = np.maximum(val[parent[lvl]], dY[lvl])
        best = max(best, int(val[Ys].max()))
    return g.length(best)


def closest_point_projection(g: MetricGraph, Y, x) -> list[int]:
    """{y in Y : d(x,y) <= d(x,Y) + 1}."""
    Ys = np.asarray(sorted({int(y) for y in Y}), dtype=np.int64)
    if not len(Ys):
        raise GraphError("empty vertex set")
    row = g.dist_row(x)[Ys]
    return Ys[row <= row.min() + g.scale].tolist()


def fit_unparametrized_qg(g: MetricGraph, samples) -> QgFit:
    """Offset, backtrack and gap constants of a sample sequence.

    Nearest-point parameters along geodesic(first, last) break ties toward the
    smallest parameter; backtrack is measured in length along the geodesic.
    """
    s = [int(v) for v in samples]
    if len(s) < 2:
        raise GraphError("need at least two samples")
    ref = list(g.geodesic(s[0], s[-1]).vertices)
    R = g.dist_rows(ref)  # R[j, v] = d(ref_j, v)
    param = g.dist_row(s[0])[ref]
    sub = R[:, s]  # (len(ref), len(s))
    idx = np.argmin(sub, axis=0)
    off = int(sub[idx, np.arange(len(s))].max())
    t = param[idx]
    back = int((np.maximum.accumulate(t) - t).max())
    gaps = [int(g.dist_row(s[i])[s[i + 1]]) for i in range(len(s) - 1)]
    return QgFit(g.length(off), g.length(back), g.length(max(gaps)))


def morse_constant_estimate(g: MetricGraph, lam=1, c=0, sample_budget: int = 2_000,
                            seed: int = 0):
    """Largest Hausdorff distance between a detoured path and its geodesic.

    Detours are concatenations geodesic(x, w) + geodesic(w, y) through a
    waypoint w whose excess d(x,w)+d(w,y)-d(x,y) is at most c; such paths are
    (lam, c)-quasigeodesics for every lam >= 1.
    """
    if Fraction(lam) < 1:
        raise GraphError("lambda must be at least 1")
    n = g.n
    lim = g.ticks_floor(c)
    D = g.distance_matrix()
    pairs = [(x, y) for x, y in combinations(range(n), 2)]
    rng = np.random.default_rng(seed)
    if len(pairs) > max(1, sample_budget // 8):
        pick = rng.choice(len(pairs), size=max(1, sample_budget // 8), replace=False)
        pairs = [pairs[i] for i in sorted(pick.tolist())]
    best = 0
    spent = 0
    for x, y in pairs:
        gam = list(g.geodesic(x, y).vertices)
        excess = D[x] + D[y] - D[x, y]
        ws = np.flatnonzero(excess <= lim)
        ws = ws[excess[ws] > 0] if lim == 0 else ws
        for w in ws.tolist():
            p = list(g.geodesic(x, w).vertices) + list(g.geodesic(w, y).vertices)[1:]
            sub = D[np.ix_(p, gam)]
            h = max(int(sub.min(axis=1).max()), int(sub.min(axis=0).max()))
            best = max(best, h)
            spent += 1
            if spent >= sample_budget:
                return g.length(best)
    return g.length(best)


def neighborhood_M(g: MetricGraph, horizon: int, r, basepoint: int | None = None) -> list[int]:
    """{x : <horizon, x>_{x0} > r}."""
    prod2 = doubled_products(g, horizon, basepoint)
    thr = math.floor(Fraction(r) * 2 * g.scale)
    return np.flatnonzero(prod2 > thr).tolist()


def neighborhood_C(g: MetricGraph, S, C) -> list[int]:
    """Closed C-neighborhood of a vertex set."""
    S = list(S)
    if not S:
        return []
    return np.flatnonzero(g.multi_source_row(S) <= g.ticks_floor(C)).tolist()


@dataclass(frozen=True)
class RayRetraction:
    vertices: tuple
    t0: int
    additive: object


def retract_ray_to_quasiconvex(g: MetricGraph, Y, ray, A) -> RayRetraction:
    """Keep the ray up to the time it enters N_A(Y) for good, then snap to Y."""
    verts = list(ray.vertices if isinstance(ray, Geodesic) else ray)
    Ys = np.asarray(sorted({int(y) for y in Y}), dtype=np.int64)
    if not len(Ys) or not verts:
        raise GraphError("empty input")
    dY = g.multi_source_row(Ys.tolist())
    lim = g.ticks_floor(A)
    inside = dY[verts] <= lim
    if not inside[-1]:
        raise GraphError("ray not asymptotic to Y")
    t0 = len(verts)
    while t0 > 0 and inside[t0 - 1]:
        t0 -= 1
    out = verts[:t0]
    for v in verts[t0:]:
        row = g.dist_row(v)[Ys]
        out.append(int(Ys[int(np.argmin(row))]))
    param = g.dist_row(verts[0])[verts]
    R = g.dist_rows(out)[:, out]
    defect = int(np.abs(R - np.abs(param[:, None] - param[None, :])).max())
    return RayRetraction(tuple(out), t0, g.length(defect))


def ray_stabilization_constant(g: MetricGraph, horizon: int, basepoint: int | None = None):
    """Measured B: max |<ray(t),x> - <h,x>| over x and t with d(x0, ray(t)) >= d(x0, x)."""
    x0 = g.basepoint if basepoint is None else basepoint
    ray = g.geodesic(x0, horizon).vertices
    d0 = g.dist_row(x0)
    ph = doubled_products(g, horizon, x0)
    best = 0
    for v in ray:
        pv = doubled_products(g, v, x0)
        mask = d0 <= d0[v]
        if mask.any():
            best = max(best, int(np.abs(pv[mask] - ph[mask]).max()))
    return as_length(Fraction(best, 2 * g.scale))


def enlargement_check(g: MetricGraph, horizon: int, C, rs) -> list[tuple]:
    """For each r: is N_C(M(r)) contained in M(r - 2C)?  Returns (r, ok, witness)."""
    out = []
    for r in rs:
        M = neighborhood_M(g, horizon, r)
        big = set(neighborhood_M(g, horizon, Fraction(r) - 2 * Fraction(C)))
        nb = neighborhood_C(g, M, C) if M else []
        bad = [v for v in nb if v not in big]
        out.append((r, not bad, bad[0] if bad else None))
    return out
