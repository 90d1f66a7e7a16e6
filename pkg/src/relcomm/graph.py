"""Graph machinery for path-based reliable communication.

Topologies are undirected graphs over integer node ids carrying per-node
role flags (authenticated, trusted, TC-equipped). The transforms here turn
trusted-path reachability into plain adjacency, and the node-split flow
graphs turn vertex-disjoint path counting into integer max-flow.

Everything is pure and deterministic: iteration follows ascending node id.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

Path = tuple  # ordered node ids, entries distinct, may be empty

Edge = tuple  # (u, v) with u < v


class CapacityError(RuntimeError):
    """Raised when a bounded store (e.g. a path set) exceeds its cap."""


def normalize_edge(u: int, v: int) -> Edge:
    if u == v:
        raise ValueError(f"self-loop at node {u}")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Topology:
    """Undirected role-annotated graph.

    ``vertices=None`` means the vertex set is all of ``range(n)``. Subgraph
    results (``compute_f_of_g`` and friends) keep the original ids and carry
    an explicit, smaller vertex set.
    """

    n: int
    edges: frozenset = frozenset()
    authenticated: frozenset = frozenset()
    trusted: frozenset = frozenset()
    tc: frozenset = frozenset()
    vertices: Optional[frozenset] = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be non-negative")
        verts = self.vertex_set()
        if not verts <= frozenset(range(self.n)):
            raise ValueError("vertices out of range")
        for e in self.edges:
            u, v = e
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if u > v:
                raise ValueError(f"edge {e} not normalized (expected u < v)")
            if u not in verts or v not in verts:
                raise ValueError(f"edge {e} leaves the vertex set")
        for name, ids in (("authenticated", self.authenticated),
                          ("trusted", self.trusted), ("tc", self.tc)):
            if not ids <= verts:
                raise ValueError(f"{name} set contains unknown node ids")
        if not self.tc <= self.authenticated:
            raise ValueError("TC-equipped nodes must be authenticated")

    def vertex_set(self) -> frozenset:
        return frozenset(range(self.n)) if self.vertices is None else self.vertices

    def untrusted(self) -> frozenset:
        return self.vertex_set() - self.trusted

    def has_edge(self, u: int, v: int) -> bool:
        return normalize_edge(u, v) in self.edges


def topology(n: int, edges: Iterable = (), authenticated: Iterable = (),
             trusted: Iterable = (), tc: Iterable = (),
             vertices: Optional[Iterable] = None) -> Topology:
    """Build a Topology from loose iterables, normalizing edge order."""
    norm = frozenset(normalize_edge(u, v) for u, v in edges)
    return Topology(
        n=n,
        edges=norm,
        authenticated=frozenset(authenticated),
        trusted=frozenset(trusted),
        tc=frozenset(tc),
        vertices=None if vertices is None else frozenset(vertices),
    )


@lru_cache(maxsize=4096)
def _adjacency(g: Topology) -> dict:
    adj = {u: set() for u in g.vertex_set()}
    for u, v in g.edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def neighbors(g: Topology, u: int) -> frozenset:
    """Nodes sharing an edge with ``u``."""
    if u not in g.vertex_set():
        raise ValueError(f"node {u} not in the topology")
    return frozenset(_adjacency(g)[u])


class UnionFind:
    """Union-find over arbitrary hashable ids, with path compression."""

    def __init__(self, items: Iterable = ()):
        self._parent = {}
        for item in items:
            self.add(item)

    def add(self, item):
        self._parent.setdefault(item, item)

    def find(self, item):
        parent = self._parent
        root = item
        while parent[root] != root:
            root = parent[root]
        while parent[item] != root:
            parent[item], item = root, parent[item]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # deterministic representative: keep the smaller root
            if rb < ra:
                ra, rb = rb, ra
            self._parent[rb] = ra
        return ra

    def together(self, a, b) -> bool:
        return self.find(a) == self.find(b)

    def classes(self) -> list:
        groups = {}
        for item in self._parent:
            groups.setdefault(self.find(item), set()).add(item)
        return [frozenset(members) for _, members in sorted(groups.items())]


Partition = UnionFind


def trusted_partition(g: Topology) -> UnionFind:
    """Connected components of the subgraph keeping only edges with at
    least one trusted endpoint."""
    uf = UnionFind(sorted(g.vertex_set()))
    for u, v in sorted(g.edges):
        if u in g.trusted or v in g.trusted:
            uf.union(u, v)
    return uf


def _trusted_components(g: Topology) -> list:
    """Connected components of the subgraph induced on the trusted nodes."""
    uf = UnionFind(sorted(g.trusted))
    for u, v in sorted(g.edges):
        if u in g.trusted and v in g.trusted:
            uf.union(u, v)
    return uf.classes()


def trusted_path_connected(g: Topology, u: int, v: int) -> bool:
    """True iff some u-v path has a nonempty, all-trusted interior.

    Both endpoints may have any role; the interior must consist of trusted
    nodes that are consecutively adjacent.
    """
    if u == v:
        return False
    adj = _adjacency(g)
    for comp in _trusted_components(g):
        anchor = comp - {u, v}
        if not anchor:
            continue
        # the chain must live in one trusted component once u and v are
        # excluded from it; components minus an endpoint can split, so walk
        # the remaining subgraph explicitly
        for part in _connected_parts(adj, anchor):
            if adj[u] & part and adj[v] & part:
                return True
    return False


def _connected_parts(adj: dict, pool: frozenset) -> list:
    parts = []
    seen = set()
    for start in sorted(pool):
        if start in seen:
            continue
        part = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y in pool and y not in part:
                    part.add(y)
                    queue.append(y)
        seen |= part
        parts.append(frozenset(part))
    return parts


def compute_f_of_g(g: Topology) -> Topology:
    """Collapse trusted relays: the graph over the untrusted nodes where two
    of them are adjacent iff they share an edge or a nonempty all-trusted
    path in ``g``. Original node ids are kept."""
    untrusted = g.untrusted()
    adj = _adjacency(g)
    edges = {e for e in g.edges if e[0] in untrusted and e[1] in untrusted}
    for comp in _trusted_components(g):
        attached = sorted(u for u in untrusted if adj[u] & comp)
        for a, b in itertools.combinations(attached, 2):
            edges.add((a, b))
    return Topology(
        n=g.n,
        edges=frozenset(edges),
        authenticated=g.authenticated & untrusted,
        trusted=frozenset(),
        tc=g.tc & untrusted,
        vertices=untrusted,
    )


def compute_g(g: Topology, sub: Topology, vt: int) -> Topology:
    """Insert trusted node ``vt`` into the subgraph ``sub``, adding an edge
    (u, vt) for each sub vertex u that is adjacent to vt in ``g`` or reaches
    it through a nonempty all-trusted path."""
    if vt not in g.trusted:
        raise ValueError(f"node {vt} is not trusted")
    if vt in sub.vertex_set():
        raise ValueError(f"node {vt} already present in the subgraph")
    if not sub.vertex_set() <= g.vertex_set():
        raise ValueError("subgraph vertices must come from the host graph")
    adj = _adjacency(g)
    comp = next(c for c in _trusted_components(g) if vt in c)
    gateway = comp - {vt}
    edges = set(sub.edges)
    for u in sorted(sub.vertex_set()):
        if g.has_edge(u, vt) or adj[u] & gateway:
            edges.add(normalize_edge(u, vt))
    return Topology(
        n=g.n,
        edges=frozenset(edges),
        authenticated=sub.authenticated | (frozenset([vt]) & g.authenticated),
        trusted=sub.trusted | frozenset([vt]),
        tc=sub.tc | (frozenset([vt]) & g.tc),
        vertices=sub.vertex_set() | frozenset([vt]),
    )


class FlowGraph:
    """Directed graph with integer edge capacities.

    Built by node splitting: original node u becomes in-node 2u and out-node
    2u+1. Extra synthetic vertices (flow roots) may be appended.
    """

    def __init__(self, size: int):
        self.size = size
        self._caps = {}
        self._adj = {v: [] for v in range(size)}

    def add_vertex(self) -> int:
        v = self.size
        self.size += 1
        self._adj[v] = []
        return v

    def add_edge(self, a: int, b: int, capacity: int):
        if a == b or a >= self.size or b >= self.size or a < 0 or b < 0:
            raise ValueError(f"bad edge ({a}, {b})")
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        if (a, b) in self._caps:
            raise ValueError(f"duplicate edge ({a}, {b})")
        self._caps[(a, b)] = capacity
        self._adj[a].append(b)
        if (b, a) not in self._caps:
            self._adj[b].append(a)  # residual direction

    def set_capacity(self, a: int, b: int, capacity: int):
        if (a, b) not in self._caps:
            raise ValueError(f"edge ({a}, {b}) does not exist")
        self._caps[(a, b)] = capacity

    def capacity(self, a: int, b: int) -> int:
        return self._caps.get((a, b), 0)

    def edges(self) -> dict:
        return dict(self._caps)


def build_flow_graph(g: Topology, f: int, trusted_capacity: int) -> FlowGraph:
    """Node-split ``g`` into a capacitated digraph: internal edge (2u, 2u+1)
    and both directions per undirected edge, with capacity
    ``trusted_capacity`` when the originating node is trusted and 1
    otherwise."""
    if f < 0:
        raise ValueError("fault bound must be non-negative")
    if trusted_capacity not in (2 * f + 1, f + 1):
        raise ValueError("trusted capacity must be 2f+1 or f+1")
    fg = FlowGraph(2 * g.n)
    verts = g.vertex_set()
    for u in sorted(verts):
        cap = trusted_capacity if u in g.trusted else 1
        fg.add_edge(2 * u, 2 * u + 1, cap)
    for u, v in sorted(g.edges):
        fg.add_edge(2 * u + 1, 2 * v, trusted_capacity if u in g.trusted else 1)
        fg.add_edge(2 * v + 1, 2 * u, trusted_capacity if v in g.trusted else 1)
    return fg


def max_flow(fg: FlowGraph, s: int, t: int) -> int:
    """Exact integer max flow from s to t (Edmonds-Karp). Does not mutate
    the flow graph."""
    if s == t:
        raise ValueError("source equals sink")
    if not (0 <= s < fg.size and 0 <= t < fg.size):
        raise ValueError("flow endpoints out of range")
    residual = dict(fg._caps)
    adj = fg._adj
    total = 0
    while True:
        # BFS for the shortest augmenting path
        prev = {s: None}
        queue = deque([s])
        while queue and t not in prev:
            x = queue.popleft()
            for y in adj[x]:
                if y not in prev and residual.get((x, y), 0) > 0:
                    prev[y] = x
                    queue.append(y)
        if t not in prev:
            return total
        bottleneck = None
        node = t
        while prev[node] is not None:
            p = prev[node]
            cap = residual[(p, node)]
            bottleneck = cap if bottleneck is None else min(bottleneck, cap)
            node = p
        node = t
        while prev[node] is not None:
            p = prev[node]
            residual[(p, node)] -= bottleneck
            residual[(node, p)] = residual.get((node, p), 0) + bottleneck
            node = p
        total += bottleneck


def vertex_connectivity(g: Topology, u: int, v: int) -> int:
    """Number of internally vertex-disjoint u-v paths, computed role-blind
    (every node has unit capacity, trusted or not)."""
    if u == v:
        raise ValueError("vertex connectivity needs two distinct nodes")
    if u not in g.vertex_set() or v not in g.vertex_set():
        raise ValueError("node id out of range")
    fg = build_flow_graph(g, 0, 1)
    return max_flow(fg, 2 * u + 1, 2 * v)


def strip_trusted(p: Path, g: Topology) -> Path:
    """Drop every trusted node from the path, preserving order."""
    return tuple(x for x in p if x not in g.trusted)


def strip_trusted_and_tc(p: Path, g: Topology) -> Path:
    """Drop every trusted and every TC-equipped node, preserving order."""
    removed = g.trusted | g.tc
    return tuple(x for x in p if x not in removed)


def has_k_disjoint(paths, k: int) -> bool:
    """Exact test: does some k-subset of the paths share no node pairwise?

    Exponential in the worst case, but k stays small (f+1) and callers cap
    their stored path sets.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    sets = sorted({frozenset(p) for p in paths}, key=lambda s: (len(s), sorted(s)))
    for s in sets:
        if not s:
            raise ValueError("paths must be nonempty; empty paths are a separate delivery case")
    return _search_disjoint(sets, k, 0, frozenset()) is not None


def find_k_disjoint(paths, k: int):
    """Like has_k_disjoint but returns one witness list of node sets, or None."""
    if k < 1:
        raise ValueError("k must be at least 1")
    sets = sorted({frozenset(p) for p in paths}, key=lambda s: (len(s), sorted(s)))
    return _search_disjoint(sets, k, 0, frozenset())


def _search_disjoint(sets, k, start, used, chosen=()):
    if k == 0:
        return list(chosen)
    if len(sets) - start < k:
        return None
    for i in range(start, len(sets)):
        s = sets[i]
        if used & s:
            continue
        hit = _search_disjoint(sets, k - 1, i + 1, used | s, chosen + (s,))
        if hit is not None:
            return hit
    return None
