"""HHS structures on a finite model: domains, relations, projections."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from ..metric_graph import MetricGraph, as_length, dumps_canonical, length_str

NESTED = 1      # i strictly nested in j
CONTAINS = 2    # j strictly nested in i
ORTH = 3
TRANS = 4
KIND_NAMES = {NESTED: "nested", CONTAINS: "contains", ORTH: "orthogonal", TRANS: "transverse"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}
FORMAT = "hhsmax-structure/1"


class StructureError(ValueError):
    """Structure violates a named invariant."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


@dataclass(frozen=True)
class Domain:
    name: str
    graph: MetricGraph
    dummy: bool = False


class HhsStructure:
    """Immutable finite HHS structure (X, S) with constant E.

    relations maps unordered name pairs to a kind; ("V", "W") -> "nested"
    means V is strictly nested in W. rho_up[(V, W)] is the vertex set
    rho^V_W in C W, defined for V nested in W or V transverse to W.
    rho_down[(V, W)] is the table C W -> C V for V nested in W.
    """

    def __init__(self, ambient: MetricGraph, domains, relations, projections,
                 rho_up=None, rho_down=None, E=3, d_inf=None, kappa_p=None,
                 radius=None, model=None):
        self.ambient = ambient
        self.domains = tuple(domains)
        self.names = tuple(d.name for d in self.domains)
        if len(set(self.names)) != len(self.names):
            raise StructureError("unique domain ids", "duplicate domain id")
        self._index = {nm: i for i, nm in enumerate(self.names)}
        m = len(self.domains)
        rel = np.zeros((m, m), dtype=np.int8)
        for (a, b), kind in relations.items():
            i, j = self.index(a), self.index(b)
            if i == j:
                raise StructureError("relation table", f"self relation on {a}")
            code = KIND_CODES[kind] if isinstance(kind, str) else int(kind)
            inv = {NESTED: CONTAINS, CONTAINS: NESTED}.get(code, code)
            if rel[i, j] and rel[i, j] != code:
                raise StructureError("relation table", f"conflicting relations for ({a},{b})")
            rel[i, j] = code
            rel[j, i] = inv
        self.rel = rel
        self.rel.setflags(write=False)
        self.proj = []
        for d in self.domains:
            t = projections.get(d.name)
            if t is None:
                raise StructureError("projection table", f"missing pi for {d.name}")
            arr = np.asarray(t, dtype=np.int64)
            arr.setflags(write=False)
            self.proj.append(arr)
        self.rho_up = {}
        for (a, b), s in (rho_up or {}).items():
            arr = np.asarray(sorted({int(v) for v in s}), dtype=np.int64)
            arr.setflags(write=False)
            self.rho_up[(self.index(a), self.index(b))] = arr
        self.rho_down = {}
        for (a, b), t in (rho_down or {}).items():
            arr = np.asarray(t, dtype=np.int64)
            arr.setflags(write=False)
            self.rho_down[(self.index(a), self.index(b))] = arr
        self.E = as_length(Fraction(E))
        rad = radius if radius is not None else ambient.eccentricity()
        self.radius = as_length(Fraction(rad))
        self.d_inf = as_length(Fraction(d_inf) if d_inf is not None else Fraction(self.radius) / 2)
        self.kappa_p = as_length(Fraction(kappa_p) if kappa_p is not None else 2 * Fraction(self.E))
        self.model = dict(model or {})
        self._diam = {}
        self._dm = {}
        self._check_shapes()

    # ------------------------------------------------------------ access
    def index(self, name) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= int(name) < len(self.domains):
                raise StructureError("domain ids", f"no domain {name}")
            return int(name)
        try:
            return self._index[name]
        except KeyError:
            raise StructureError("domain ids", f"no domain {name!r}") from None

    def __len__(self):
        return len(self.domains)

    def graph(self, i) -> MetricGraph:
        return self.domains[self.index(i)].graph

    def active(self) -> list[int]:
        return [i for i, d in enumerate(self.domains) if not d.dummy]

    def nested(self, i, j) -> bool:
        """i strictly nested in j."""
        return self.rel[i, j] == NESTED

    def nested_eq(self, i, j) -> bool:
        return i == j or self.rel[i, j] == NESTED

    def orth(self, i, j) -> bool:
        return self.rel[i, j] == ORTH

    def trans(self, i, j) -> bool:
        return self.rel[i, j] == TRANS

    def maximal_candidates(self) -> list[int]:
        return [i for i in self.active()
                if not any(self.rel[i, j] == NESTED for j in self.active())]

    @property
    def top(self) -> int:
        cands = self.maximal_candidates()
        full = [i for i in cands if all(self.nested_eq(j, i) for j in self.active())]
        if len(full) != 1:
            raise StructureError("unique maximal domain", f"candidates {[self.names[i] for i in cands]}")
        return full[0]

    def below(self, j) -> list[int]:
        """S_W: domains nested in W (including W)."""
        return [i for i in self.active() if self.nested_eq(i, j)]

    def perp(self, j) -> list[int]:
        return [i for i in self.active() if self.orth(i, j)]

    def diam(self, i):
        i = self.index(i)
        if i not in self._diam:
            self._diam[i] = self.domains[i].graph.diameter()
        return self._diam[i]

    def unbounded(self, i) -> bool:
        return Fraction(self.diam(i)) >= Fraction(self.d_inf)

    def dm(self, i) -> np.ndarray:
        """Distance matrix of C W in ticks."""
        i = self.index(i)
        if i not in self._dm:
            self._dm[i] = self.domains[i].graph.distance_matrix()
        return self._dm[i]

    def ticks(self, i, value) -> int:
        return self.domains[self.index(i)].graph.ticks_floor(value)

    def length(self, i, ticks):
        return self.domains[self.index(i)].graph.length(ticks)

    def pi(self, i, x):
        return int(self.proj[self.index(i)][x])

    def d_W(self, i, x, y):
        """d_W(pi_W(x), pi_W(y)) as a length."""
        i = self.index(i)
        g = self.domains[i].graph
        return g.length(int(g.dist_row(self.proj[i][x])[self.proj[i][y]]))

    def rho(self, i, j) -> np.ndarray:
        """rho^i_j as a vertex array of C j."""
        return self.rho_up[(self.index(i), self.index(j))]

    def rho_map(self, i, j) -> np.ndarray:
        """rho_i^j : C j -> C i for i nested in j."""
        return self.rho_down[(self.index(i), self.index(j))]

    def chains(self):
        """Longest chain length of strictly nested domains."""
        act = self.active()
        order = sorted(act, key=lambda i: sum(self.nested(k, i) for k in act))
        longest = {}
        for i in order:
            longest[i] = 1 + max([longest[k] for k in act if self.nested(k, i) and k in longest], default=0)
        return max(longest.values(), default=0)

    # ------------------------------------------------------------ validation
    def _check_shapes(self):
        n = self.ambient.n
        m = len(self.domains)
        for i, d in enumerate(self.domains):
            if self.proj[i].shape != (n,):
                raise StructureError("projection table", f"pi_{d.name} must map all {n} ambient vertices")
            if len(self.proj[i]) and (self.proj[i].min() < 0 or self.proj[i].max() >= d.graph.n):
                raise StructureError("projection table", f"pi_{d.name} leaves C {d.name}")
        for i, j in combinations(range(m), 2):
            if self.rel[i, j] == 0:
                raise StructureError("relation table", f"no relation for ({self.names[i]},{self.names[j]})")
        for (i, j), arr in self.rho_up.items():
            if len(arr) == 0:
                raise StructureError("rho sets", f"rho^{self.names[i]}_{self.names[j]} empty")
            if arr.min() < 0 or arr.max() >= self.domains[j].graph.n:
                raise StructureError("rho sets", f"rho^{self.names[i]}_{self.names[j]} leaves C {self.names[j]}")
        for (i, j), arr in self.rho_down.items():
            if arr.shape != (self.domains[j].graph.n,):
                raise StructureError("rho tables", f"rho_{self.names[i]}^{self.names[j]} has wrong length")
            if len(arr) and (arr.min() < 0 or arr.max() >= self.domains[i].graph.n):
                raise StructureError("rho tables", f"rho_{self.names[i]}^{self.names[j]} leaves C {self.names[i]}")
        for i in range(m):
            for j in range(m):
                if self.domains[i].dummy or self.domains[j].dummy:
                    continue
                code = self.rel[i, j]
                if code in (NESTED, TRANS) and (i, j) not in self.rho_up:
                    raise StructureError("rho sets", f"rho^{self.names[i]}_{self.names[j]} missing")
                if code == NESTED and (i, j) not in self.rho_down:
                    raise StructureError("rho tables", f"rho_{self.names[i]}^{self.names[j]} missing")

    def validate_relations(self):
        """Raise StructureError for violated relation-table invariants."""
        act = self.active()
        for i in act:
            for j in act:
                for k in act:
                    if self.nested(i, j) and self.nested(j, k) and not self.nested(i, k):
                        raise StructureError("nesting is transitive",
                                             f"{self.names[i]} < {self.names[j]} < {self.names[k]}")
                    if self.nested_eq(i, j) and self.orth(j, k) and not self.orth(i, k):
                        raise StructureError("orthogonality closed under nesting",
                                             f"{self.names[i]} < {self.names[j]} orth {self.names[k]}")
        self.top
        if self.chains() > Fraction(self.E):
            raise StructureError("finite complexity", f"chain length {self.chains()} > E")
        return self

    # ------------------------------------------------------------ io
    def to_dict(self) -> dict:
        amb = self.ambient
        doms = []
        top = None
        try:
            top = self.top
        except StructureError:
            pass
        for i, d in enumerate(self.domains):
            ref = "ambient" if d.graph is amb else d.graph.to_dict()
            doms.append({"id": d.name, "graph": ref, "maximal": i == top, "dummy": d.dummy})
        rels = []
        for i, j in combinations(range(len(self.domains)), 2):
            rels.append([self.names[i], self.names[j], KIND_NAMES[int(self.rel[i, j])]])
        rhos = []
        for (i, j), arr in sorted(self.rho_up.items()):
            rhos.append({"from": self.names[i], "to": self.names[j], "set": arr.tolist()})
        for (i, j), arr in sorted(self.rho_down.items()):
            rhos.append({"from": self.names[j], "to": self.names[i], "table": arr.tolist()})
        return {
            "format": FORMAT,
            "ambient": amb.to_dict(),
            "domains": doms,
            "relations": rels,
            "projections": {self.names[i]: self.proj[i].tolist() for i in range(len(self.domains))},
            "rhos": rhos,
            "constants": {
                "E": length_str(self.E),
                "D_inf": length_str(self.d_inf),
                "kappa_P": length_str(self.kappa_p),
                "radius": length_str(self.radius),
            },
            "model": self.model,
        }

    @classmethod
    def from_dict(cls, data: dict, strict: bool = True) -> "HhsStructure":
        if data.get("format") != FORMAT:
            raise StructureError("file format", f"expected {FORMAT}")
        for key in ("ambient", "domains", "relations", "projections", "constants"):
            if key not in data:
                raise StructureError("file format", f"missing section {key!r}")
        amb = MetricGraph.from_dict(data["ambient"])
        doms = []
        for d in data["domains"]:
            g = amb if d["graph"] == "ambient" else MetricGraph.from_dict(d["graph"])
            doms.append(Domain(d["id"], g, bool(d.get("dummy", False))))
        rels = {}
        for a, b, kind in data["relations"]:
            if kind not in KIND_CODES:
                raise StructureError("relation table", f"unknown relation kind {kind!r}")
            rels[(a, b)] = kind
        up, down = {}, {}
        for r in data.get("rhos", []):
            if "set" in r:
                up[(r["from"], r["to"])] = r["set"]
            else:
                down[(r["to"], r["from"])] = r["table"]
        c = data["constants"]
        h = cls(amb, doms, rels, data["projections"], up, down,
                E=Fraction(c["E"]), d_inf=Fraction(c["D_inf"]), kappa_p=Fraction(c["kappa_P"]),
                radius=Fraction(c["radius"]) if "radius" in c else None, model=data.get("model"))
        flagged = [d["id"] for d in data["domains"] if d.get("maximal")]
        if strict:
            h.validate_relations()
            if flagged != [h.names[h.top]]:
                raise StructureError("unique maximal domain", f"file flags {flagged}")
        return h

    def dumps(self) -> str:
        return dumps_canonical(self.to_dict())

    @classmethod
    def loads(cls, text: str, strict: bool = True) -> "HhsStructure":
        return cls.from_dict(json.loads(text), strict=strict)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path, strict: bool = True) -> "HhsStructure":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read(), strict=strict)

    # ------------------------------------------------------------ editing
    def replace(self, **changes) -> "HhsStructure":
        """Copy with some constructor arguments replaced (used for mutations)."""
        args = self.constructor_args()
        args.update(changes)
        return HhsStructure(**args)

    def restrict(self, keep) -> "HhsStructure":
        """Sub-structure on the named domains, with relations and rhos restricted."""
        keep_idx = sorted({self.index(k) for k in keep})
        names = {self.names[i] for i in keep_idx}
        args = self.constructor_args()
        args["domains"] = [self.domains[i] for i in keep_idx]
        args["relations"] = {k: v for k, v in args["relations"].items() if set(k) <= names}
        args["projections"] = {k: v for k, v in args["projections"].items() if k in names}
        args["rho_up"] = {k: v for k, v in args["rho_up"].items() if set(k) <= names}
        args["rho_down"] = {k: v for k, v in args["rho_down"].items() if set(k) <= names}
        return HhsStructure(**args)

    def constructor_args(self) -> dict:
        rels = {}
        for i, j in combinations(range(len(self.domains)), 2):
            rels[(self.names[i], self.names[j])] = KIND_NAMES[int(self.rel[i, j])]
        return dict(
            ambient=self.ambient, domains=list(self.domains), relations=rels,
            projections={self.names[i]: self.proj[i] for i in range(len(self.domains))},
            rho_up={(self.names[i], self.names[j]): a for (i, j), a in self.rho_up.items()},
            rho_down={(self.names[i], self.names[j]): a for (i, j), a in self.rho_down.items()},
            E=self.E, d_inf=self.d_inf, kappa_p=self.kappa_p, radius=self.radius, model=self.model,
        )

    def __repr__(self):
        return f"HhsStructure(domains={len(self.domains)}, n={self.ambient.n}, E={self.E})"
