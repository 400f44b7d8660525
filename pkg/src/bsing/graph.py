"""Graph invariants of the critical-set decomposition.

Vertices carry a genus, edges may be loops or parallel.  A loop contributes
2 to the degree of its vertex.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Vertex:
    id: str
    genus: int = 0


@dataclass(frozen=True)
class Edge:
    id: str
    a: str
    b: str

    @property
    def is_loop(self) -> bool:
        return self.a == self.b

    def other(self, v: str) -> str:
        if v == self.a:
            return self.b
        if v == self.b:
            return self.a
        raise GraphError(f"vertex {v} not on edge {self.id}")


@dataclass(frozen=True)
class BGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        ids = [v.id for v in self.vertices]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate vertex ids")
        eids = [e.id for e in self.edges]
        if len(set(eids)) != len(eids):
            raise GraphError("duplicate edge ids")
        known = set(ids)
        for e in self.edges:
            if e.a not in known or e.b not in known:
                raise GraphError(f"edge {e.id} references a missing vertex")
        for v in self.vertices:
            if v.genus < 0:
                raise GraphError(f"vertex {v.id} has negative genus")

    @classmethod
    def build(cls, genera: dict[str, int] | Sequence[int],
              edges: Iterable[tuple]) -> "BGraph":
        """Convenience constructor: ``edges`` as (a, b) or (id, a, b)."""
        if not isinstance(genera, dict):
            genera = {str(i): g for i, g in enumerate(genera)}
        verts = tuple(Vertex(str(k), int(g)) for k, g in genera.items())
        es = []
        for i, e in enumerate(edges):
            if len(e) == 2:
                es.append(Edge(f"e{i}", str(e[0]), str(e[1])))
            else:
                es.append(Edge(str(e[0]), str(e[1]), str(e[2])))
        return cls(verts, tuple(es))

    @property
    def vertex_ids(self) -> list[str]:
        return [v.id for v in self.vertices]

    def genus(self, v: str) -> int:
        for x in self.vertices:
            if x.id == v:
                return x.genus
        raise KeyError(v)

    def degree(self, v: str) -> int:
        return sum((e.a == v) + (e.b == v) for e in self.edges)

    def incident(self, v: str) -> list[Edge]:
        return [e for e in self.edges if e.a == v or e.b == v]

    def adjacency(self) -> dict[str, list[tuple[str, str]]]:
        """v -> list of (edge id, neighbour); a loop appears twice."""
        adj: dict[str, list] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            adj[e.a].append((e.id, e.b))
            adj[e.b].append((e.id, e.a))
        return adj

    def edge(self, eid: str) -> Edge:
        for e in self.edges:
            if e.id == eid:
                return e
        raise KeyError(eid)

    # ---- io ------------------------------------------------------------
    def to_json(self) -> dict:
        return {"vertices": [{"id": v.id, "genus": v.genus} for v in self.vertices],
                "edges": [{"id": e.id, "a": e.a, "b": e.b} for e in self.edges]}

    @classmethod
    def from_json(cls, obj) -> "BGraph":
        try:
            verts = tuple(Vertex(str(v["id"]), int(v.get("genus", 0))) for v in obj["vertices"])
            edges = tuple(Edge(str(e["id"]), str(e["a"]), str(e["b"])) for e in obj.get("edges", []))
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from None
        return cls(verts, edges)

    def to_dot(self, orientation: "EdgeOrientation | None" = None) -> str:
        lines = ["graph G {" if orientation is None else "digraph G {"]
        for v in self.vertices:
            lines.append(f'  "{v.id}" [label="{v.id} (g={v.genus})"];')
        for e in self.edges:
            if orientation is None:
                lines.append(f'  "{e.a}" -- "{e.b}" [label="{e.id}"];')
            else:
                s, t = orientation.pairs[e.id]
                lines.append(f'  "{s}" -> "{t}" [label="{e.id}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EdgeOrientation:
    pairs: dict[str, tuple[str, str]]

    def check(self, g: BGraph) -> None:
        for e in g.edges:
            if e.id not in self.pairs:
                raise GraphError(f"edge {e.id} not oriented")
            if sorted(self.pairs[e.id]) != sorted((e.a, e.b)):
                raise GraphError(f"edge {e.id}: orientation is not a permutation of its endpoints")

    def out_in(self, v: str) -> tuple[int, int]:
        out = sum(1 for s, _ in self.pairs.values() if s == v)
        inn = sum(1 for _, t in self.pairs.values() if t == v)
        return out, inn


@dataclass(frozen=True)
class SignAssignment:
    signs: dict[str, int]
    kind: str  # "vertex2coloring" | "edge2coloring"

    def __post_init__(self):
        if self.kind not in ("vertex2coloring", "edge2coloring"):
            raise GraphError(f"unknown sign assignment kind {self.kind!r}")
        for k, s in self.signs.items():
            if s not in (1, -1):
                raise GraphError(f"sign of {k} must be +1 or -1")

    def to_json(self) -> dict:
        return {"kind": self.kind, "signs": {k: ("+" if s > 0 else "-") for k, s in self.signs.items()}}


# ---------------------------------------------------------------------------
# colorings
# ---------------------------------------------------------------------------

def _bfs_color(g: BGraph):
    """Return (coloring, None) or (None, odd closed walk as vertex list)."""
    adj = g.adjacency()
    color: dict[str, int] = {}
    parent: dict[str, str | None] = {}
    for root in g.vertex_ids:
        if root in color:
            continue
        color[root] = 1
        parent[root] = None
        q = deque([root])
        while q:
            u = q.popleft()
            for _, w in adj[u]:
                if w not in color:
                    color[w] = -color[u]
                    parent[w] = u
                    q.append(w)
                elif color[w] == color[u]:
                    return None, _odd_walk(parent, u, w)
    return color, None


def _odd_walk(parent, u, w):
    def chain(x):
        out = [x]
        while parent[out[-1]] is not None:
            out.append(parent[out[-1]])
        return out

    pu, pw = chain(u), chain(w)
    anc = set(pu)
    lca = next(x for x in pw if x in anc)
    up = pu[: pu.index(lca) + 1]
    down = pw[: pw.index(lca)]
    walk = up + down[::-1]
    return walk + [walk[0]] if walk else [u, u]


def two_color(g: BGraph) -> SignAssignment | None:
    """Vertex 2-coloring (adjacent vertices have opposite signs) or None."""
    color, _ = _bfs_color(g)
    if color is None:
        return None
    return SignAssignment(dict(color), "vertex2coloring")


def odd_closed_walk(g: BGraph) -> list[str] | None:
    """Closed walk with an odd number of edges, or None if bipartite.

    A loop at v is reported as ``[v, v]``.
    """
    for e in g.edges:
        if e.is_loop:
            return [e.a, e.a]
    _, walk = _bfs_color(g)
    return walk


def good_orientation(g: BGraph) -> EdgeOrientation:
    """Orientation with an in- and an out-edge at every vertex of degree > 1.

    Deletes, in edge order, each edge touching a vertex of current degree > 2;
    orients the residual paths and cycles along a walk; reinserts the deleted
    edges in reverse order.  A reinserted edge whose far endpoint has current
    degree 1 is pointed against that endpoint's existing edge.
    """
    deg = {v: g.degree(v) for v in g.vertex_ids}
    removed: list[Edge] = []
    kept: list[Edge] = []
    for e in g.edges:
        if deg[e.a] > 2 or deg[e.b] > 2:
            removed.append(e)
            deg[e.a] -= 1
            deg[e.b] -= 1
        else:
            kept.append(e)

    pairs: dict[str, tuple[str, str]] = {}
    _orient_low_degree(kept, pairs)

    # current in/out counts per vertex
    out_e: dict[str, list[str]] = {v: [] for v in g.vertex_ids}
    in_e: dict[str, list[str]] = {v: [] for v in g.vertex_ids}
    for eid, (s, t) in pairs.items():
        out_e[s].append(eid)
        in_e[t].append(eid)

    for e in reversed(removed):
        u, w = e.a, e.b
        if e.is_loop:
            s, t = u, u
        else:
            # the endpoint that forced deletion is `u` if deg was > 2 there
            cur = {x: len(out_e[x]) + len(in_e[x]) for x in (u, w)}
            # pick the endpoint most in need as the 'other' vertex
            far = w if cur[w] <= cur[u] else u
            near = u if far == w else w
            if cur[far] == 1:
                if out_e[far]:
                    s, t = near, far  # far already has an out-edge: make this one incoming
                else:
                    s, t = far, near
            elif cur[near] == 1:
                if out_e[near]:
                    s, t = far, near
                else:
                    s, t = near, far
            else:
                s, t = near, far
        pairs[e.id] = (s, t)
        out_e[s].append(e.id)
        in_e[t].append(e.id)
    return EdgeOrientation({e.id: pairs[e.id] for e in g.edges})


def _orient_low_degree(edges: list[Edge], pairs: dict):
    """Orient a max-degree-2 multigraph: each component is a path or cycle."""
    adj: dict[str, list[Edge]] = {}
    for e in edges:
        adj.setdefault(e.a, []).append(e)
        if not e.is_loop:
            adj.setdefault(e.b, []).append(e)
    used: set[str] = set()

    def walk(start):
        v = start
        while True:
            nxt = next((e for e in adj.get(v, []) if e.id not in used), None)
            if nxt is None:
                return
            used.add(nxt.id)
            w = nxt.other(v)
            pairs[nxt.id] = (v, w)
            v = w

    # paths first, started from an endpoint so the walk covers them in order
    for v in sorted(adj, key=lambda x: (len(adj[x]) != 1, x)):
        if len(adj[v]) == 1:
            walk(v)
    for v in sorted(adj):
        walk(v)


def check_good_orientation(g: BGraph, o: EdgeOrientation) -> list[str]:
    """Vertices of degree >= 2 lacking an in- or out-edge."""
    o.check(g)
    bad = []
    for v in g.vertex_ids:
        if g.degree(v) >= 2:
            out, inn = o.out_in(v)
            if out == 0 or inn == 0:
                bad.append(v)
    return bad


def edge_two_color(g: BGraph, max_edges: int = 64) -> SignAssignment | None:
    """Edge signs with both signs at every vertex of degree >= 2, or None.

    Exhaustive backtracking with forward checking, most-constrained edges
    first and alternating trial signs, so typical inputs need no backtracking.
    """
    if len(g.edges) > max_edges:
        raise GraphError(f"edge 2-coloring search limited to {max_edges} edges")
    need = {v for v in g.vertex_ids if g.degree(v) >= 2}
    inc: dict[str, list[int]] = {v: [] for v in g.vertex_ids}
    for i, e in enumerate(g.edges):
        inc[e.a].append(i)
        if not e.is_loop:
            inc[e.b].append(i)
    for v in need:
        if len(inc[v]) < 2:
            return None  # a lone loop: degree 2 but a single edge

    n = len(g.edges)
    # most-constrained edges first: those touching low edge-count vertices
    order = sorted(range(n), key=lambda i: min(
        len(inc[g.edges[i].a]) if g.edges[i].a in need else 99,
        len(inc[g.edges[i].b]) if g.edges[i].b in need else 99))
    col = [0] * n
    ends = [(g.edges[i].a, g.edges[i].b) for i in range(n)]

    def ok(v):
        if v not in need:
            return True
        seen_p = seen_m = False
        free = False
        for j in inc[v]:
            c = col[j]
            if c == 1:
                seen_p = True
            elif c == -1:
                seen_m = True
            else:
                free = True
        if seen_p and seen_m:
            return True
        if not free:
            return False
        # one free edge can fix one missing sign only
        nfree = sum(1 for j in inc[v] if col[j] == 0)
        missing = (not seen_p) + (not seen_m)
        return nfree >= missing

    def rec(k):
        if k == n:
            return True
        i = order[k]
        a, b = ends[i]
        for c in (1, -1) if k % 2 == 0 else (-1, 1):
            col[i] = c
            if ok(a) and ok(b) and rec(k + 1):
                return True
        col[i] = 0
        return False

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4 * n + 100))
    try:
        found = rec(0)
    finally:
        sys.setrecursionlimit(old)
    if not found:
        return None
    return SignAssignment({g.edges[i].id: col[i] for i in range(n)}, "edge2coloring")


def check_edge_coloring(g: BGraph, s: SignAssignment) -> list[str]:
    bad = []
    for v in g.vertex_ids:
        if g.degree(v) >= 2:
            signs = {s.signs[e.id] for e in g.incident(v)}
            if signs != {1, -1}:
                bad.append(v)
    return bad


# ---------------------------------------------------------------------------
# structure and bounds
# ---------------------------------------------------------------------------

def is_acyclic(g: BGraph) -> bool:
    """True iff g is a forest; loops and parallel edges are cycles."""
    parent = {v: v for v in g.vertex_ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges:
        ra, rb = find(e.a), find(e.b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def connected_components(g: BGraph) -> list[list[str]]:
    adj = g.adjacency()
    seen: set[str] = set()
    comps = []
    for v in g.vertex_ids:
        if v in seen:
            continue
        comp = []
        q = deque([v])
        seen.add(v)
        while q:
            u = q.popleft()
            comp.append(u)
            for _, w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    q.append(w)
        comps.append(comp)
    return comps


def arnold_bound_surface(g: BGraph) -> int:
    """sum over vertices of 2 g_v + |deg(v) - 2|."""
    return sum(2 * v.genus + abs(g.degree(v.id) - 2) for v in g.vertices)


def arnold_bound_smooth(betti: Sequence[int]) -> int:
    if any(int(b) != b or b < 0 for b in betti):
        raise ValueError("Betti numbers must be nonnegative integers")
    return int(sum(betti))


def arnold_bound_mapping_tori(per_vertex: Sequence[tuple[int, Sequence[int]]]) -> int:
    """sum_v max(betti_sum_v - sum_j counts_vj, 0)."""
    total = 0
    for betti_sum, counts in per_vertex:
        if betti_sum < 0 or any(c < 0 for c in counts):
            raise ValueError("inputs to the mapping-tori bound must be nonnegative")
        total += max(int(betti_sum) - int(sum(counts)), 0)
    return total


def load_graph(path) -> BGraph:
    with open(path) as fh:
        return BGraph.from_json(json.load(fh))
