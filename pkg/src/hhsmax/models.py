"""Bundled model families: Cayley balls with hand-built HHS structures.

Vertices are numbered in BFS order from the identity with generators tried in
a fixed order, so the radius-r ball is a prefix of every larger ball. Labels
are the BFS words, which are shortlex normal forms.
"""
from __future__ import annotations

import string
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .hhs_core.structure import Domain, HhsStructure
from .metric_graph import MetricGraph

FAMILIES = ("grid-Zn", "free-Fk", "tree-x-tree", "product-FkxZ", "electrified-Fk", "tree-of-flats")
ALIASES = {"grid-Z2": ("grid-Zn", {"n": 2}), "free-F2": ("free-Fk", {"k": 2}),
           "electrified-F2": ("electrified-Fk", {"k": 2}), "F2xZ": ("product-FkxZ", {"k": 2}),
           "product-F2xZ": ("product-FkxZ", {"k": 2})}
VERTEX_BUDGET = 200_000
DEFAULT_E = {"grid-Zn": 3, "free-Fk": 1, "tree-x-tree": 3, "product-FkxZ": 3, "electrified-Fk": 3,
             "tree-of-flats": 3}
# exact consistency: product regions of the flats need no slack
DEFAULT_KAPPA_P = {"tree-of-flats": 0}


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------- groups

class Group:
    """Right multiplication by generators on hashable keys."""

    identity = None
    letters: tuple = ()

    def inverse_letter(self, a: str) -> str:
        raise NotImplementedError

    def mul(self, key, a: str):
        raise NotImplementedError

    def act(self, key, word: str):
        for a in word:
            if a not in self.letters:
                raise ModelError(f"unknown generator {a!r}")
            key = self.mul(key, a)
        return key


class FreeAbelian(Group):
    def __init__(self, n: int):
        self.n = n
        low = string.ascii_lowercase[:n]
        self.letters = tuple(x for a in low for x in (a, a.upper()))
        self.identity = (0,) * n

    def inverse_letter(self, a):
        return a.swapcase()

    def mul(self, key, a):
        i = self.letters.index(a) // 2
        s = 1 if a.islower() else -1
        k = list(key)
        k[i] += s
        return tuple(k)


class FreeGroup(Group):
    def __init__(self, k: int, alphabet: str = string.ascii_lowercase):
        low = alphabet[:k]
        self.letters = tuple(x for a in low for x in (a, a.upper()))
        self.identity = ""

    def inverse_letter(self, a):
        return a.swapcase()

    def mul(self, key, a):
        if key and key[-1] == a.swapcase():
            return key[:-1]
        return key + a


class InvolutionFreeProduct(Group):
    """Free product of copies of Z/2; its Cayley graph is a regular tree."""

    def __init__(self, valence: int, alphabet: str = string.ascii_lowercase):
        self.letters = tuple(alphabet[:valence])
        self.identity = ""

    def inverse_letter(self, a):
        return a

    def mul(self, key, a):
        if key and key[-1] == a:
            return key[:-1]
        return key + a


class DirectProduct(Group):
    def __init__(self, left: Group, right: Group):
        if set(left.letters) & set(right.letters):
            raise ModelError("factor alphabets must be disjoint")
        self.left, self.right = left, right
        self.letters = left.letters + right.letters
        self.identity = (left.identity, right.identity)

    def inverse_letter(self, a):
        return self.left.inverse_letter(a) if a in self.left.letters else self.right.inverse_letter(a)

    def mul(self, key, a):
        if a in self.left.letters:
            return (self.left.mul(key[0], a), key[1])
        return (key[0], self.right.mul(key[1], a))


class FlatFreeProduct(Group):
    """Z^2 * Z = <a, b> * <c>. Keys are syllable tuples: ("f", i, j) or ("c", k)."""

    letters = ("a", "A", "b", "B", "c", "C")
    identity = ()
    _step = {"a": (1, 0), "A": (-1, 0), "b": (0, 1), "B": (0, -1)}

    def inverse_letter(self, a):
        return a.swapcase()

    def mul(self, key, a):
        if a in self._step:
            di, dj = self._step[a]
            if key and key[-1][0] == "f":
                i, j = key[-1][1] + di, key[-1][2] + dj
                return key[:-1] if (i, j) == (0, 0) else key[:-1] + (("f", i, j),)
            return key + (("f", di, dj),)
        dk = 1 if a == "c" else -1
        if key and key[-1][0] == "c":
            k = key[-1][1] + dk
            return key[:-1] if k == 0 else key[:-1] + (("c", k),)
        return key + (("c", dk),)


@dataclass
class CayleyBall:
    group: Group
    radius: int
    keys: list
    words: list
    index: dict
    edges: list  # (u, v, letter) with u < v
    graph: MetricGraph = None

    def vertex(self, key) -> int:
        try:
            return self.index[key]
        except KeyError:
            raise ModelError("element outside the ball") from None

    def word_vertex(self, word: str) -> int:
        return self.vertex(self.group.act(self.group.identity, word))


def cayley_ball(group: Group, radius: int, budget: int = VERTEX_BUDGET) -> CayleyBall:
    """BFS ball; vertex i is the i-th element discovered."""
    ident = group.identity
    keys, words, depth = [ident], [""], [0]
    index = {ident: 0}
    q = deque([0])
    while q:
        u = q.popleft()
        if depth[u] == radius:
            continue
        for a in group.letters:
            k = group.mul(keys[u], a)
            if k not in index:
                if len(keys) >= budget:
                    raise ModelError(f"vertex budget {budget} exceeded")
                index[k] = len(keys)
                keys.append(k)
                words.append(words[u] + a)
                depth.append(depth[u] + 1)
                q.append(index[k])
    edges = {}
    for u, k in enumerate(keys):
        for a in group.letters:
            v = index.get(group.mul(k, a))
            if v is not None and v != u:
                key = (min(u, v), max(u, v))
                edges.setdefault(key, a if u < v else group.inverse_letter(a))
    elist = sorted((u, v, a) for (u, v), a in edges.items())
    g = MetricGraph(len(keys), [(u, v) for u, v, _ in elist], 0, words)
    return CayleyBall(group, radius, keys, words, index, elist, g)


def point_graph(label: str = "*") -> MetricGraph:
    return MetricGraph(1, [], 0, [label])


def path_graph_centered(radius: int) -> tuple[MetricGraph, dict]:
    """Path on -radius..radius numbered 0, 1, -1, 2, -2, ... (prefix-stable)."""
    coords = [0]
    for t in range(1, radius + 1):
        coords += [t, -t]
    idx = {c: i for i, c in enumerate(coords)}
    edges = [(idx[t], idx[t + 1]) for t in range(-radius, radius)]
    return MetricGraph(len(coords), edges, 0, [str(c) for c in coords]), idx


# ---------------------------------------------------------------- specs

@dataclass(frozen=True)
class ModelSpec:
    family: str
    radius: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def parse(cls, name: str, radius: int, seed: int = 0, **params) -> "ModelSpec":
        fam, extra = ALIASES.get(name, (name, {}))
        merged = dict(extra)
        merged.update({k: v for k, v in params.items() if v is not None})
        return cls(fam, int(radius), merged, seed)

    def validate(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}")
        if self.radius < 2:
            raise ModelError("radius must be at least 2")
        return self

    def to_dict(self) -> dict:
        p = {k: (list(map(list, v)) if k == "subgroups" else v) for k, v in sorted(self.params.items())}
        return {"family": self.family, "radius": self.radius, "params": p, "seed": self.seed}

    @property
    def tag(self) -> str:
        p = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}[{p}]"


@dataclass
class Model:
    spec: ModelSpec
    ball: CayleyBall
    structure: HhsStructure

    @property
    def graph(self) -> MetricGraph:
        return self.ball.graph


def build_model(spec: ModelSpec, E=None, d_inf=None, kappa_p=None) -> Model:
    spec.validate()
    fam = spec.family
    builder = {"grid-Zn": _grid, "free-Fk": _free, "tree-x-tree": _tree_x_tree,
               "product-FkxZ": _fk_x_z, "electrified-Fk": _electrified,
               "tree-of-flats": _tree_of_flats}[fam]
    E = DEFAULT_E[fam] if E is None else E
    kappa_p = DEFAULT_KAPPA_P.get(fam) if kappa_p is None else kappa_p
    ball, doms, rels, proj, up, down = builder(spec)
    h = HhsStructure(ball.graph, doms, rels, proj, up, down, E=E, d_inf=d_inf,
                     kappa_p=kappa_p, radius=spec.radius, model=spec.to_dict())
    return Model(spec, ball, h)


def build_radius_ladder(spec: ModelSpec, radii, **kw) -> list[Model]:
    if isinstance(spec, (list, tuple)):
        fams = {s.family for s in spec}
        if len(fams) != 1:
            raise ModelError("mismatched family across ladder")
        spec = spec[0]
    out = [build_model(ModelSpec(spec.family, int(r), spec.params, spec.seed), **kw) for r in sorted(radii)]
    for small, big in zip(out, out[1:]):
        if big.ball.words[: small.graph.n] != small.ball.words:
            raise ModelError("prefix property violated")
    return out


# ---------------------------------------------------------------- families

def _grid(spec):
    n = int(spec.params.get("n", 2))
    R = spec.radius
    ball = cayley_ball(FreeAbelian(n), R)
    S = Domain("S", point_graph("S"))
    doms = [S]
    rels, proj, up, down = {}, {"S": np.zeros(ball.graph.n, np.int64)}, {}, {}
    line, idx = path_graph_centered(R)
    for i in range(n):
        nm = f"V{i + 1}"
        doms.append(Domain(nm, line))
        proj[nm] = np.array([idx[k[i]] for k in ball.keys], dtype=np.int64)
        rels[(nm, "S")] = "nested"
        up[(nm, "S")] = [0]
        down[(nm, "S")] = [idx[0]]
        for j in range(i):
            rels[(f"V{j + 1}", nm)] = "orthogonal"
    return ball, doms, rels, proj, up, down


def _free(spec):
    k = int(spec.params.get("k", 2))
    ball = cayley_ball(FreeGroup(k), spec.radius)
    doms = [Domain("S", ball.graph)]
    return ball, doms, {}, {"S": np.arange(ball.graph.n)}, {}, {}


def _product(spec, left: Group, right: Group):
    R = spec.radius
    ball = cayley_ball(DirectProduct(left, right), R)
    lb = cayley_ball(left, R)
    rb = cayley_ball(right, R)
    doms = [Domain("S", point_graph("S")), Domain("left", lb.graph), Domain("right", rb.graph)]
    proj = {
        "S": np.zeros(ball.graph.n, np.int64),
        "left": np.array([lb.index[k[0]] for k in ball.keys], dtype=np.int64),
        "right": np.array([rb.index[k[1]] for k in ball.keys], dtype=np.int64),
    }
    rels = {("left", "S"): "nested", ("right", "S"): "nested", ("left", "right"): "orthogonal"}
    up = {("left", "S"): [0], ("right", "S"): [0]}
    down = {("left", "S"): [0], ("right", "S"): [0]}
    return ball, doms, rels, proj, up, down


def _tree_x_tree(spec):
    val = int(spec.params.get("valence", 3))
    return _product(spec, InvolutionFreeProduct(val, "abcdefgh"), InvolutionFreeProduct(val, "pqrstuvw"))


def _fk_x_z(spec):
    k = int(spec.params.get("k", 2))
    return _product(spec, FreeGroup(k), FreeGroup(1, "t"))


def _components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    comps = {}
    for v in range(n):
        comps.setdefault(find(v), []).append(v)
    return sorted(comps.values(), key=lambda c: c[0])


def nearest_in_set(g: MetricGraph, members) -> np.ndarray:
    """For every vertex, the lowest-id nearest member of the set."""
    mem = np.asarray(sorted(members), dtype=np.int64)
    rows = g.dist_rows(mem)
    return mem[np.argmin(rows, axis=0)]


def _electrified(spec):
    k = int(spec.params.get("k", 2))
    subgroups = spec.params.get("subgroups", (("a",),))
    grp = FreeGroup(k)
    ball = cayley_ball(grp, spec.radius)
    g = ball.graph
    n = g.n
    cosets = []
    for gens in subgroups:
        gens = tuple(gens)
        allowed = set()
        for a in gens:
            if len(a) != 1 or a.lower() not in grp.letters:
                raise ModelError("subgroup generators must be basis letters")
            allowed |= {a.lower(), a.upper()}
        sub = [(u, v) for u, v, a in ball.edges if a in allowed]
        for comp in _components(n, sub):
            if len(comp) >= 2:
                cosets.append(("".join(gens), comp))
    cliques = [(comp, ("coset", j)) for j, (_, comp) in enumerate(cosets)]
    cs = MetricGraph(n, g.edges, 0, g.labels, cliques)
    doms = [Domain("S", cs)]
    proj = {"S": np.arange(n)}
    rels, up, down = {}, {}, {}
    local_of = []
    near_all = []
    for j, (gen, comp) in enumerate(cosets):
        nm = f"Q{j}"
        loc = {v: i for i, v in enumerate(comp)}
        local_of.append(loc)
        ce = [(loc[u], loc[v]) for u, v, _ in g.edges if u in loc and v in loc]
        base = loc[int(nearest_in_set(g, comp)[0])]
        cq = MetricGraph(len(comp), ce, base, [g.labels[v] for v in comp])
        doms.append(Domain(nm, cq))
        near = nearest_in_set(g, comp)
        near_all.append(near)
        proj[nm] = np.array([loc[int(v)] for v in near], dtype=np.int64)
        rels[(nm, "S")] = "nested"
        up[(nm, "S")] = comp
        down[(nm, "S")] = proj[nm]
    for i in range(len(cosets)):
        for j in range(i + 1, len(cosets)):
            a, b = f"Q{i}", f"Q{j}"
            rels[(a, b)] = "transverse"
            up[(a, b)] = sorted({int(proj[b][v]) for v in cosets[i][1]})
            up[(b, a)] = sorted({int(proj[a][v]) for v in cosets[j][1]})
    return ball, doms, rels, proj, up, down


def _flat_base(key):
    return key[:-1] if key and key[-1][0] == "f" else key


def _syllable_length(key) -> int:
    return sum(abs(s[1]) if s[0] == "c" else abs(s[1]) + abs(s[2]) for s in key)


def _flat_gate(key, base) -> tuple:
    """Coordinates of the nearest point of the coset base.Z^2 to key."""
    m = len(base)
    if key[:m] != base or len(key) == m or key[m][0] != "f":
        return (0, 0)
    return (key[m][1], key[m][2])


def _tree_of_flats(spec):
    R = spec.radius
    ball = cayley_ball(FlatFreeProduct(), R)
    g = ball.graph
    n = g.n
    min_flat = int(spec.params.get("min_flat", (R + 1) // 2))
    flat = [(u, v) for u, v, a in ball.edges if a in "aAbB"]
    # flats of in-ball radius below min_flat are bounded: left as plain squares
    cosets = [c for c in _components(n, flat)
              if R - _syllable_length(_flat_base(ball.keys[c[0]])) >= min_flat]
    cs = MetricGraph(n, g.edges, 0, g.labels, [(c, ("flat", j)) for j, c in enumerate(cosets)])
    doms = [Domain("S", cs)]
    proj = {"S": np.arange(n)}
    rels, up, down = {}, {}, {}
    names = []
    for j, comp in enumerate(cosets):
        base = _flat_base(ball.keys[comp[0]])
        line, idx = path_graph_centered(R - _syllable_length(base))
        gates = [_flat_gate(k, base) for k in ball.keys]
        for axis, tag in ((0, "a"), (1, "b")):
            nm = f"F{j}{tag}"
            names.append((j, nm))
            doms.append(Domain(nm, line))
            proj[nm] = np.array([idx[gt[axis]] for gt in gates], dtype=np.int64)
            rels[(nm, "S")] = "nested"
            up[(nm, "S")] = comp
            down[(nm, "S")] = proj[nm]
        rels[(f"F{j}a", f"F{j}b")] = "orthogonal"
    for x, (j, a) in enumerate(names):
        for k, b in names[x + 1:]:
            if j == k:
                continue
            rels[(a, b)] = "transverse"
            up[(a, b)] = [int(proj[b][cosets[j][0]])]
            up[(b, a)] = [int(proj[a][cosets[k][0]])]
    return ball, doms, rels, proj, up, down


def model_from_name(name: str, radius: int, seed: int = 0, **params) -> Model:
    return build_model(ModelSpec.parse(name, radius, seed, **params))


def element_vertex(model: Model, word) -> int:
    """Vertex of the group element given by a generator word or coordinate tuple."""
    grp = model.ball.group
    if isinstance(word, (tuple, list)):
        if not isinstance(grp, FreeAbelian):
            raise ModelError("coordinate elements only make sense for grid models")
        return model.ball.vertex(tuple(int(c) for c in word))
    return model.ball.word_vertex(word)


def coordinate_word(coords) -> str:
    """Word for a Z^n coordinate vector (a = e1, b = e2, ...)."""
    out = []
    for i, c in enumerate(coords):
        a = string.ascii_lowercase[i]
        out.append((a if c > 0 else a.upper()) * abs(int(c)))
    return "".join(out)


def orbit(model: Model, word: str, K: int):
    """Vertices g^k x0 for |k| <= K, stopping where the orbit leaves the ball.

    Returns (vertices in order k=-K'..K', achieved K').
    """
    grp = model.ball.group
    inv = "".join(grp.inverse_letter(a) for a in reversed(word))
    fwd, back = [], []
    key = grp.identity
    for _ in range(K):
        key = grp.act(key, word)
        if key not in model.ball.index:
            break
        fwd.append(model.ball.index[key])
    key = grp.identity
    for _ in range(K):
        key = grp.act(key, inv)
        if key not in model.ball.index:
            break
        back.append(model.ball.index[key])
    k = min(len(fwd), len(back))
    verts = list(reversed(back[:k])) + [0] + fwd[:k]
    return verts, k
