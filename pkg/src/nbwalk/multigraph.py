"""Dart-based multigraphs, lazily generated infinite graph families, and balls.

A non-loop edge contributes two mutually reversed darts; a loop contributes a
single self-reversed dart and adds 1 to the degree of its vertex.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, NamedTuple, Optional, Sequence

import numpy as np


class Dart(NamedTuple):
    id: Hashable
    tail: Hashable
    head: Hashable
    reversal: Hashable

    @property
    def is_loop(self) -> bool:
        return self.id == self.reversal


@dataclass(frozen=True)
class Multigraph:
    vertices: tuple
    darts: tuple  # darts[i].id == i
    incidence: dict  # vertex -> tuple of dart ids with that tail, sorted

    def degree(self, v) -> int:
        return len(self.incidence[v])

    def darts_at(self, v) -> list[Dart]:
        return [self.darts[i] for i in self.incidence[v]]

    def canonical_key(self, v):
        return v

    @property
    def n_edges(self) -> int:
        return sum(1 for e in self.darts if not e.is_loop) // 2

    @property
    def n_loops(self) -> int:
        return sum(1 for e in self.darts if e.is_loop)

    def regular_degree(self) -> Optional[int]:
        degs = {len(ids) for ids in self.incidence.values()}
        return degs.pop() if len(degs) == 1 else None

    def is_regular(self, d: int) -> bool:
        return self.regular_degree() == d

    def edge_list(self) -> tuple[list, list]:
        edges, loops = [], []
        for e in self.darts:
            if e.is_loop:
                loops.append(e.tail)
            elif e.id < e.reversal:
                edges.append([e.tail, e.head])
        return edges, loops

    def to_json(self) -> dict:
        edges, loops = self.edge_list()
        return {"vertices": list(self.vertices), "edges": edges, "loops": loops}


def build_graph(edge_list: Sequence[Sequence], loops: Sequence = (), vertices: Optional[Sequence] = None) -> Multigraph:
    """Build a multigraph with deterministic dart ids.

    Edge ``k`` gets darts ``2k`` (u->v) and ``2k+1`` (v->u); loop ``j`` gets the
    single dart ``2*len(edge_list) + j``. Vertices not listed explicitly are
    added in order of first appearance.
    """
    order: list = list(vertices) if vertices is not None else []
    seen = set(order)
    if len(seen) != len(order):
        raise ValueError("duplicate vertex keys")
    for u, v in edge_list:
        for x in (u, v):
            if x not in seen:
                seen.add(x)
                order.append(x)
    for x in loops:
        if x not in seen:
            seen.add(x)
            order.append(x)
    if not order:
        raise ValueError("graph must have at least one vertex")

    darts: list[Dart] = []
    for k, (u, v) in enumerate(edge_list):
        darts.append(Dart(2 * k, u, v, 2 * k + 1))
        darts.append(Dart(2 * k + 1, v, u, 2 * k))
    base = 2 * len(edge_list)
    for j, x in enumerate(loops):
        darts.append(Dart(base + j, x, x, base + j))

    incidence: dict = {x: [] for x in order}
    for e in darts:
        incidence[e.tail].append(e.id)
    return Multigraph(tuple(order), tuple(darts), {x: tuple(ids) for x, ids in incidence.items()})


def load_graph(path) -> Multigraph:
    with open(path) as fh:
        return graph_from_json(json.load(fh))


def graph_from_json(obj: dict) -> Multigraph:
    def key(x):
        return tuple(x) if isinstance(x, list) else x

    edges = [(key(u), key(v)) for u, v in obj.get("edges", [])]
    loops = [key(x) for x in obj.get("loops", [])]
    vertices = [key(x) for x in obj["vertices"]] if "vertices" in obj else None
    return build_graph(edges, loops, vertices)


@dataclass
class ValidationReport:
    involution_violations: list
    connected: bool
    regular_degree: Optional[int]
    min_degree: int
    n_vertices: int
    n_darts: int

    @property
    def ok(self) -> bool:
        return not self.involution_violations and self.connected

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "involution_violations": self.involution_violations,
            "connected": self.connected,
            "regular_degree": self.regular_degree,
            "min_degree": self.min_degree,
            "n_vertices": self.n_vertices,
            "n_darts": self.n_darts,
        }


def check_dart(e: Dart, by_id) -> list[str]:
    problems = []
    r = by_id.get(e.reversal)
    if r is None:
        return [f"dart {e.id!r}: reversal {e.reversal!r} missing"]
    if r.reversal != e.id:
        problems.append(f"dart {e.id!r}: reversal is not an involution")
    if r.tail != e.head or r.head != e.tail:
        problems.append(f"dart {e.id!r}: reversal endpoints do not match")
    if (e.reversal == e.id) != (e.tail == e.head):
        problems.append(f"dart {e.id!r}: self-reversed iff loop violated")
    return problems


def validate(g: Multigraph) -> ValidationReport:
    by_id = {e.id: e for e in g.darts}
    problems = []
    for e in g.darts:
        problems.extend(check_dart(e, by_id))
    seen = {g.vertices[0]}
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for i in g.incidence[v]:
            w = g.darts[i].head
            if w not in seen:
                seen.add(w)
                queue.append(w)
    degs = [len(g.incidence[v]) for v in g.vertices]
    return ValidationReport(
        involution_violations=problems,
        connected=len(seen) == len(g.vertices),
        regular_degree=g.regular_degree(),
        min_degree=min(degs),
        n_vertices=len(g.vertices),
        n_darts=len(g.darts),
    )


# ---------------------------------------------------------------------------
# Oracles


class GraphOracle:
    """Uniform read-only access to a locally finite graph."""

    family = "abstract"
    root: Hashable = None
    regular: Optional[int] = None  # common degree if the graph is regular
    min_degree: Optional[int] = None

    def degree(self, v) -> int:
        return len(self.darts_at(v))

    def darts_at(self, v) -> list[Dart]:
        raise NotImplementedError

    def dart_at(self, v, k: int) -> Dart:
        return self.darts_at(v)[k]

    def dart_index(self, v, dart_id) -> int:
        for k, e in enumerate(self.darts_at(v)):
            if e.id == dart_id:
                return k
        raise KeyError(dart_id)

    def canonical_key(self, v):
        return v

    def lumped_chain(self, o) -> Optional["LumpedChain"]:
        """Exact quotient of simple random walk started at ``o``, or None."""
        return None

    def describe(self) -> dict:
        return {"family": self.family}


class FiniteOracle(GraphOracle):
    family = "finite"

    def __init__(self, g: Multigraph, name: str = "finite"):
        self.graph = g
        self.family = name
        self.root = g.vertices[0]
        self.regular = g.regular_degree()
        self.min_degree = min(g.degree(v) for v in g.vertices)
        self._darts = {v: g.darts_at(v) for v in g.vertices}

    def degree(self, v) -> int:
        return len(self.graph.incidence[v])

    def darts_at(self, v) -> list[Dart]:
        return self._darts[v]

    def dart_at(self, v, k):
        return self._darts[v][k]

    def dart_index(self, v, dart_id):
        return self.graph.incidence[v].index(dart_id)

    def lumped_chain(self, o):
        return LumpedChain.from_finite(self.graph, o)

    def describe(self):
        return {"family": self.family, "graph": self.graph.to_json()}


def _alternating_word(h: int, symbols: Sequence[int] = (0, 1)) -> bytes:
    return bytes(symbols[i % 2] for i in range(h))


class RegularTreeOracle(GraphOracle):
    """T_d with vertices coded as reduced words over d self-inverse symbols.

    A vertex is a byte string with no symbol repeated consecutively; the dart
    with label ``a`` at ``w`` leads to ``w[:-1]`` if ``w`` ends in ``a`` and to
    ``w + a`` otherwise. Dart ids are ``(tail, label)``.
    """

    family = "regular_tree"

    def __init__(self, d: int):
        if d < 2:
            raise ValueError("regular_tree needs d >= 2")
        self.d = d
        self.root = b""
        self.regular = d
        self.min_degree = d
        self._sym = [bytes([a]) for a in range(d)]

    def degree(self, v):
        return self.d

    def dart_at(self, v, a):
        w = v[:-1] if v and v[-1] == a else v + self._sym[a]
        return Dart((v, a), v, w, (w, a))

    def darts_at(self, v):
        return [self.dart_at(v, a) for a in range(self.d)]

    def dart_index(self, v, dart_id):
        return dart_id[1]

    def lumped_chain(self, o):
        return LumpedChain.radial_tree(self.d, loops=0, representative=lambda h: _alternating_word(h))

    def describe(self):
        return {"family": self.family, "d": self.d}


class LoopedTreeOracle(GraphOracle):
    """(d-1)-regular tree darts (labels 0..d-2) plus one loop (label d-1) per vertex."""

    family = "looped_tree"

    def __init__(self, d: int):
        if d < 3:
            raise ValueError("looped_tree needs d >= 3")
        self.d = d
        self.root = b""
        self.regular = d
        self.min_degree = d
        self._sym = [bytes([a]) for a in range(d)]

    def degree(self, v):
        return self.d

    def dart_at(self, v, a):
        if a == self.d - 1:
            return Dart((v, a), v, v, (v, a))
        w = v[:-1] if v and v[-1] == a else v + self._sym[a]
        return Dart((v, a), v, w, (w, a))

    def darts_at(self, v):
        return [self.dart_at(v, a) for a in range(self.d)]

    def dart_index(self, v, dart_id):
        return dart_id[1]

    def lumped_chain(self, o):
        return LumpedChain.radial_tree(self.d - 1, loops=1, representative=lambda h: _alternating_word(h))

    def describe(self):
        return {"family": self.family, "d": self.d}


class TreePlusCycleOracle(GraphOracle):
    """T_d with a simple cycle of length L glued to the tree root.

    Tree vertices are ``b"t" + word`` (root is ``b"t"``, also cycle vertex 0);
    the other cycle vertices are ``b"c" + i`` for 1 <= i < L. Tree darts carry
    labels 0..d-1; the cycle dart leaving cycle vertex i forwards has label d,
    backwards d+1. For L = 1 the cycle is a single loop (label d) at the root.
    The root has degree d+2 (d+1 when L = 1); other cycle vertices degree 2.
    """

    family = "tree_plus_cycle"

    def __init__(self, d: int, L: int):
        if d < 2:
            raise ValueError("tree_plus_cycle needs d >= 2")
        if L < 1:
            raise ValueError("tree_plus_cycle needs L >= 1")
        self.d = d
        self.L = L
        self.root = b"t"
        self.regular = None
        self.min_degree = 2 if L > 1 else d
        self._sym = [bytes([a]) for a in range(d)]
        self._cyc = [b"t"] + [b"c" + i.to_bytes(4, "big") for i in range(1, L)]

    def _cycle_index(self, v) -> Optional[int]:
        if v == b"t":
            return 0
        if v[:1] == b"c":
            return int.from_bytes(v[1:], "big")
        return None

    def degree(self, v):
        if v == b"t":
            return self.d + (1 if self.L == 1 else 2)
        if v[:1] == b"c":
            return 2
        return self.d

    def dart_at(self, v, a):
        i = self._cycle_index(v)
        if i is not None and (i > 0 or a >= self.d):
            if i > 0:
                a += self.d  # cycle vertices other than the root only have labels d, d+1
            if self.L == 1:
                return Dart((v, a), v, v, (v, a))
            if a == self.d:
                w = self._cyc[(i + 1) % self.L]
                return Dart((v, a), v, w, (w, self.d + 1))
            w = self._cyc[(i - 1) % self.L]
            return Dart((v, a), v, w, (w, self.d))
        w = v[:-1] if len(v) > 1 and v[-1] == a else v + self._sym[a]
        return Dart((v, a), v, w, (w, a))

    def darts_at(self, v):
        return [self.dart_at(v, k) for k in range(self.degree(v))]

    def dart_index(self, v, dart_id):
        a = dart_id[1]
        return a - self.d if v[:1] == b"c" else a

    def lumped_chain(self, o):
        if self._cycle_index(o) is None:
            return None
        return LumpedChain.tree_plus_cycle(self, self._cycle_index(o))

    def describe(self):
        return {"family": self.family, "d": self.d, "L": self.L}


@dataclass(frozen=True)
class FamilySpec:
    family: str
    d: Optional[int] = None
    L: Optional[int] = None
    k: Optional[int] = None
    m: Optional[int] = None
    j: Optional[int] = None
    graph: Optional[Any] = None  # Multigraph, JSON dict, or path to a graph file

    @classmethod
    def from_dict(cls, obj: dict) -> "FamilySpec":
        known = {"family", "d", "L", "k", "m", "j", "graph"}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown family keys: {sorted(extra)}")
        if "family" not in obj:
            raise ValueError("family spec needs a 'family' key")
        return cls(**obj)

    def to_dict(self) -> dict:
        out = {"family": self.family}
        for name in ("d", "L", "k", "m", "j"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.graph is not None:
            out["graph"] = self.graph.to_json() if isinstance(self.graph, Multigraph) else self.graph
        return out


def cycle_graph(k: int) -> Multigraph:
    if k < 3:
        raise ValueError("cycle needs k >= 3")
    return build_graph([(i, (i + 1) % k) for i in range(k)])


def complete_graph(m: int) -> Multigraph:
    if m < 2:
        raise ValueError("complete needs m >= 2")
    return build_graph([(i, j) for i in range(m) for j in range(i + 1, m)])


def bouquet(j: int) -> Multigraph:
    if j < 1:
        raise ValueError("bouquet needs j >= 1")
    return build_graph([], [0] * j)


def petersen_graph() -> Multigraph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return build_graph(outer + spokes + inner)


def make_oracle(spec) -> GraphOracle:
    if isinstance(spec, GraphOracle):
        return spec
    if isinstance(spec, Multigraph):
        return FiniteOracle(spec)
    if isinstance(spec, dict):
        spec = FamilySpec.from_dict(spec)
    fam = spec.family

    def need(name):
        val = getattr(spec, name)
        if val is None:
            raise ValueError(f"family {fam!r} needs parameter {name!r}")
        return int(val)

    if fam == "regular_tree":
        return RegularTreeOracle(need("d"))
    if fam == "looped_tree":
        return LoopedTreeOracle(need("d"))
    if fam == "tree_plus_cycle":
        return TreePlusCycleOracle(need("d"), need("L"))
    if fam == "cycle":
        return FiniteOracle(cycle_graph(need("k")), "cycle")
    if fam == "complete":
        return FiniteOracle(complete_graph(need("m")), "complete")
    if fam == "bouquet":
        return FiniteOracle(bouquet(need("j")), "bouquet")
    if fam == "petersen":
        return FiniteOracle(petersen_graph(), "petersen")
    if fam == "finite":
        g = spec.graph
        if g is None:
            raise ValueError("family 'finite' needs a graph")
        if isinstance(g, str):
            g = load_graph(g)
        elif isinstance(g, dict):
            g = graph_from_json(g)
        return FiniteOracle(g)
    raise ValueError(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# Exact quotients of simple random walk


@dataclass
class LumpedChain:
    """A strongly lumpable quotient of simple random walk.

    States are integers; ``origin`` is the state of the start vertex, and that
    state is a singleton class, so return probabilities to the origin are
    preserved. ``trans[s]`` lists ``(target, probability)`` pairs and
    ``representative(s)`` returns a vertex of the class. Classes are orbits of
    automorphisms fixing the origin, so any isomorphism-invariant vertex
    property is constant on each class.
    """

    origin: int
    transitions: Any  # callable: state -> list[(state, Fraction)]
    representative: Any  # callable: state -> vertex key
    step: Any  # vectorised: (states ndarray, uniforms ndarray) -> states
    description: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def trans(self, s: int) -> list:
        out = self._cache.get(s)
        if out is None:
            out = self._cache[s] = self.transitions(s)
        return out

    @classmethod
    def radial_tree(cls, b: int, loops: int, representative) -> "LumpedChain":
        # distance from the origin in T_b, plus `loops` self-loops per vertex
        d = b + loops
        back = Fraction(1, d)
        fwd = Fraction(b - 1, d)
        stay = Fraction(loops, d)

        def transitions(h):
            if h == 0:
                out = [(1, Fraction(b, d))]
            else:
                out = [(h - 1, back), (h + 1, fwd)]
            if loops:
                out.append((h, stay))
            return out

        def step(h, u):
            x = u * d
            up = np.where(h == 0, x < b, (x >= 1) & (x < b))
            down = (h > 0) & (x < 1)
            return h + up.astype(h.dtype) - down.astype(h.dtype)

        return cls(0, transitions, representative, step, f"radial T_{b} + {loops} loops")

    @classmethod
    def from_finite(cls, g: Multigraph, o) -> "LumpedChain":
        index = {v: i for i, v in enumerate(g.vertices)}
        offsets = np.zeros(len(g.vertices) + 1, dtype=np.int64)
        heads = []
        for i, v in enumerate(g.vertices):
            hs = [index[g.darts[e].head] for e in g.incidence[v]]
            heads.extend(hs)
            offsets[i + 1] = offsets[i] + len(hs)
        heads = np.asarray(heads, dtype=np.int64)
        deg = np.diff(offsets)

        def transitions(s):
            v = g.vertices[s]
            out: dict = {}
            for e in g.incidence[v]:
                t = index[g.darts[e].head]
                out[t] = out.get(t, 0) + Fraction(1, len(g.incidence[v]))
            return sorted(out.items())

        def step(s, u):
            return heads[offsets[s] + (u * deg[s]).astype(np.int64)]

        return cls(index[o], transitions, lambda s: g.vertices[s], step, "finite graph")

    @classmethod
    def tree_plus_cycle(cls, oracle: TreePlusCycleOracle, start: int) -> "LumpedChain":
        # state h >= 0: tree vertex at depth h (0 is the root); state -i: cycle vertex i >= 1
        d, L = oracle.d, oracle.L
        droot = oracle.degree(b"t")

        def transitions(s):
            if s > 0:
                return [(s - 1, Fraction(1, d)), (s + 1, Fraction(d - 1, d))]
            if s == 0:
                out = [(1, Fraction(d, droot))]
                if L == 1:
                    out.append((0, Fraction(1, droot)))
                else:
                    nxt, prv = -(1 % L), -((L - 1) % L)
                    if nxt == prv:
                        out.append((nxt, Fraction(2, droot)))
                    else:
                        out += [(nxt, Fraction(1, droot)), (prv, Fraction(1, droot))]
                return out
            i = -s
            targets = [-((i + 1) % L), -((i - 1) % L)]
            if targets[0] == targets[1]:
                return [(targets[0], Fraction(1))]
            return [(targets[0], Fraction(1, 2)), (targets[1], Fraction(1, 2))]

        def step(s, u):
            out = s.copy()
            tree = s > 0
            x = u * d
            out[tree] = s[tree] + np.where(x[tree] < 1, -1, 1)
            root = s == 0
            xr = u[root] * droot
            r = np.ones(xr.shape, dtype=s.dtype)
            if L == 1:
                r[xr >= d] = 0
            else:
                r[(xr >= d) & (xr < d + 1)] = -(1 % L)
                r[xr >= d + 1] = -((L - 1) % L)
            out[root] = r
            cyc = s < 0
            i = -s[cyc]
            fwd = u[cyc] < 0.5
            out[cyc] = -np.where(fwd, (i + 1) % L, (i - 1) % L)
            return out

        def representative(s):
            if s >= 0:
                return b"t" + _alternating_word(s)
            return oracle._cyc[-s]

        return cls(-start if start else 0, transitions, representative, step, f"tree_plus_cycle(d={d}, L={L})")


# ---------------------------------------------------------------------------
# Balls


@dataclass
class Ball:
    graph: Multigraph
    center: Hashable
    radius: int
    boundary: frozenset
    distance: dict
    dart_map: dict  # oracle dart id -> ball dart id


def ball(oracle, o, r: int, max_vertices: Optional[int] = None) -> Ball:
    """Induced multigraph on the vertices within distance ``r`` of ``o``."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    oracle = make_oracle(oracle) if isinstance(oracle, (Multigraph, dict, FamilySpec)) else oracle
    dist = {o: 0}
    order = [o]
    queue = deque([o])
    while queue:
        v = queue.popleft()
        if dist[v] == r:
            continue
        for e in oracle.darts_at(v):
            if e.head not in dist:
                dist[e.head] = dist[v] + 1
                order.append(e.head)
                queue.append(e.head)
                if max_vertices is not None and len(order) > max_vertices:
                    raise ResourceGuardError(f"ball guard: more than {max_vertices} vertices within radius {r}")
    edges, loops, edge_ids, loop_ids = [], [], [], []
    done = set()
    for v in order:
        for e in oracle.darts_at(v):
            if e.head not in dist or e.id in done:
                continue
            if e.is_loop:
                loops.append(v)
                loop_ids.append(e.id)
            else:
                edges.append((v, e.head))
                edge_ids.append((e.id, e.reversal))
                done.add(e.reversal)
            done.add(e.id)
    g = build_graph(edges, loops, order)
    dart_map = {}
    for k, (a, b) in enumerate(edge_ids):
        dart_map[a] = 2 * k
        dart_map[b] = 2 * k + 1
    for j, a in enumerate(loop_ids):
        dart_map[a] = 2 * len(edges) + j
    boundary = frozenset(v for v in order if dist[v] == r)
    return Ball(g, o, r, boundary, dist, dart_map)


class ResourceGuardError(RuntimeError):
    """A configured resource budget would be exceeded."""
