"""Line-oriented topology files and seeded topology generators.

File format, one directive per line, ``#`` starts a comment:

    n <count> f <bound>
    node <id> [auth] [trusted] [tc]
    edge <u> <v>

Node lines are only needed for nodes with role flags; ``tc`` requires the
``auth`` flag on the same line. Duplicate edges are rejected.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Optional

from .graph import Topology, normalize_edge, topology

FAMILIES = ("random-gnp", "random-regular", "ring-of-cliques", "star",
            "two-tier-gateway")


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def parse(text: str):
    """Parse a topology file, returning ``(Topology, f)``."""
    n = None
    f = None
    edges = set()
    auth, trusted, tc = set(), set(), set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "n":
            if n is not None:
                raise ParseError(lineno, "duplicate header")
            if len(parts) != 4 or parts[2] != "f":
                raise ParseError(lineno, "expected 'n <count> f <bound>'")
            try:
                n, f = int(parts[1]), int(parts[3])
            except ValueError:
                raise ParseError(lineno, "header values must be integers")
            if n < 0 or f < 0:
                raise ParseError(lineno, "header values must be non-negative")
        elif kind == "node":
            if n is None:
                raise ParseError(lineno, "header must come first")
            if len(parts) < 2:
                raise ParseError(lineno, "expected 'node <id> [flags]'")
            try:
                node = int(parts[1])
            except ValueError:
                raise ParseError(lineno, "node id must be an integer")
            if not 0 <= node < n:
                raise ParseError(lineno, f"node id {node} out of range")
            flags = set(parts[2:])
            unknown = flags - {"auth", "trusted", "tc"}
            if unknown:
                raise ParseError(lineno, f"unknown flags {sorted(unknown)}")
            if "tc" in flags and "auth" not in flags:
                raise ParseError(lineno, "tc requires auth")
            if "auth" in flags:
                auth.add(node)
            if "trusted" in flags:
                trusted.add(node)
            if "tc" in flags:
                tc.add(node)
        elif kind == "edge":
            if n is None:
                raise ParseError(lineno, "header must come first")
            if len(parts) != 3:
                raise ParseError(lineno, "expected 'edge <u> <v>'")
            try:
                u, v = int(parts[1]), int(parts[2])
            except ValueError:
                raise ParseError(lineno, "edge endpoints must be integers")
            if u == v:
                raise ParseError(lineno, "self-loops are not allowed")
            if not (0 <= u < n and 0 <= v < n):
                raise ParseError(lineno, "edge endpoint out of range")
            e = normalize_edge(u, v)
            if e in edges:
                raise ParseError(lineno, f"duplicate edge {e}")
            edges.add(e)
        else:
            raise ParseError(lineno, f"unknown directive {kind!r}")
    if n is None:
        raise ParseError(0, "missing 'n <count> f <bound>' header")
    try:
        return topology(n, edges, authenticated=auth, trusted=trusted, tc=tc), f
    except ValueError as exc:
        raise ParseError(0, str(exc))


def parse_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def emit(g: Topology, f: int) -> str:
    """Render a topology back to file form; ``parse(emit(g, f))`` round-trips."""
    lines = [f"n {g.n} f {f}"]
    for node in sorted(g.vertex_set()):
        flags = []
        if node in g.authenticated:
            flags.append("auth")
        if node in g.trusted:
            flags.append("trusted")
        if node in g.tc:
            flags.append("tc")
        if flags:
            lines.append(f"node {node} {' '.join(flags)}")
    for u, v in sorted(g.edges):
        lines.append(f"edge {u} {v}")
    return "\n".join(lines) + "\n"


def write_file(path, g: Topology, f: int):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit(g, f))


# ---------------------------------------------------------------- generators

@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n: int
    param: float = 0.5
    trusted: int = 0
    authenticated: int = 0
    tc: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not (0 <= self.trusted <= self.n and 0 <= self.authenticated <= self.n):
            raise ValueError("role counts must fit the node count")
        if self.tc > self.authenticated:
            raise ValueError("cannot equip more TCs than authenticated nodes")


def _edges_gnp(rng, n, p):
    return [e for e in itertools.combinations(range(n), 2) if rng.random() < p]


def _edges_regular(rng, n, d):
    d = int(d)
    if d >= n or (n * d) % 2:
        raise ValueError("degree must satisfy d < n with n*d even")
    for _ in range(500):
        stubs = [v for v in range(n) for _ in range(d)]
        rng.shuffle(stubs)
        edges = set()
        ok = True
        for i in range(0, len(stubs), 2):
            u, v = stubs[i], stubs[i + 1]
            if u == v or normalize_edge(u, v) in edges:
                ok = False
                break
            edges.add(normalize_edge(u, v))
        if ok:
            return edges
    raise ValueError("failed to sample a simple regular graph")


def _edges_ring_of_cliques(n, size):
    size = int(size)
    if size < 1 or n % size:
        raise ValueError("node count must be a multiple of the clique size")
    k = n // size
    edges = set()
    for i in range(k):
        base = i * size
        edges |= {normalize_edge(base + a, base + b)
                  for a, b in itertools.combinations(range(size), 2)}
    for i in range(k):
        edges.add(normalize_edge(i * size, ((i + 1) % k) * size))
    return edges


def _edges_star(n):
    return [(0, i) for i in range(1, n)]


def _edges_two_tier(rng, n, gateways):
    gateways = int(gateways)
    if not 1 <= gateways <= n:
        raise ValueError("gateway count out of range")
    edges = {normalize_edge(a, b)
             for a, b in itertools.combinations(range(gateways), 2)}
    for leaf in range(gateways, n):
        picks = rng.sample(range(gateways), min(2, gateways))
        for gw in picks:
            edges.add(normalize_edge(leaf, gw))
    return edges


def generate(spec: GeneratorSpec) -> Topology:
    """Deterministic topology sampling: one seed, one topology."""
    rng = random.Random(spec.seed)
    if spec.family == "random-gnp":
        edges = _edges_gnp(rng, spec.n, spec.param)
    elif spec.family == "random-regular":
        edges = _edges_regular(rng, spec.n, spec.param)
    elif spec.family == "ring-of-cliques":
        edges = _edges_ring_of_cliques(spec.n, spec.param)
    elif spec.family == "star":
        edges = _edges_star(spec.n)
    else:
        edges = _edges_two_tier(rng, spec.n, spec.param)
    nodes = list(range(spec.n))
    auth = sorted(rng.sample(nodes, spec.authenticated))
    tc = sorted(rng.sample(auth, spec.tc)) if spec.tc else []
    if spec.family == "star":
        hubs = [0]
    elif spec.family == "two-tier-gateway":
        hubs = list(range(int(spec.param)))
    else:
        hubs = []
    if hubs:
        # hub families put their trust where the structure concentrates
        order = hubs + [v for v in nodes if v not in hubs]
        trusted = sorted(order[:spec.trusted])
    else:
        trusted = sorted(rng.sample(nodes, spec.trusted))
    return topology(spec.n, edges, authenticated=auth, trusted=trusted, tc=tc)
