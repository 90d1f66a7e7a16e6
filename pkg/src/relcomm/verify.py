"""Topology correctness checkers and the exhaustive desk-scale oracle.

Two independent checkers decide whether path dissemination achieves
delivery everywhere on a topology (a max-flow sweep over the node-split
graph, and a graph-simplification sweep using plain vertex connectivity),
plus the threshold-swapped variant for signature flooding and a
set-growing fixpoint for the dual protocol. ``oracle_check`` certifies any
of them at small scale by brute force: it simulates every admissible
corruption set and, for the path protocols, cross-asserts the simulator
against a directly computed graph condition.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .graph import (
    Topology,
    build_flow_graph,
    compute_f_of_g,
    compute_g,
    has_k_disjoint,
    max_flow,
    neighbors,
    strip_trusted,
    vertex_connectivity,
)
from .protocols import OptFlags
from .sim import ORACLE_SIZE_GUARD, RunConfig, admissible_corruptions, run


class OracleDisagreement(RuntimeError):
    """The simulator and the direct graph condition disagreed."""


@dataclass(frozen=True)
class Verdict:
    ok: bool
    failing_pair: Optional[tuple] = None
    failing_broadcaster: Optional[int] = None
    witness: Optional[frozenset] = None

    def __post_init__(self):
        if self.ok:
            if (self.failing_pair is not None or self.failing_broadcaster is not None
                    or self.witness is not None):
                raise ValueError("a passing verdict carries no failure details")
        elif self.failing_pair is None and self.failing_broadcaster is None:
            raise ValueError("a failing verdict names a pair or a broadcaster")


# ------------------------------------------------- shared pair connectivity

def _g_graphs(g: Topology):
    fg = compute_f_of_g(g)
    cache = {t: compute_g(g, fg, t) for t in sorted(g.trusted)}
    return fg, cache


def _pair_connected(g: Topology, fg, gcache, u, v) -> bool:
    """Neighbors, or joined by a nonempty all-trusted path; decided in the
    transform matching the pair's roles."""
    ut, vt = u in g.trusted, v in g.trusted
    if not ut and not vt:
        return fg.has_edge(u, v)
    if ut and not vt:
        return gcache[u].has_edge(u, v)
    if vt and not ut:
        return gcache[v].has_edge(u, v)
    return compute_g(g, gcache[u], v).has_edge(u, v)


# ------------------------------------------------------- max-flow checker

def _verify_maxflow(g: Topology, f: int, bound: int) -> Verdict:
    fg, gcache = _g_graphs(g)
    dg = build_flow_graph(g, f, bound)
    verts = sorted(g.vertex_set())
    for i, u in enumerate(verts):
        for v in verts[i + 1:]:
            if _pair_connected(g, fg, gcache, u, v):
                continue
            restore = []
            if u not in g.trusted:
                # the broadcaster is correct, so its own copies are not
                # capped by its unit vertex capacity
                for w in sorted(neighbors(g, u)):
                    restore.append((2 * u + 1, 2 * w, dg.capacity(2 * u + 1, 2 * w)))
                    dg.set_capacity(2 * u + 1, 2 * w, bound)
            flow = max_flow(dg, 2 * u + 1, 2 * v)
            for a, b, c in restore:
                dg.set_capacity(a, b, c)
            if flow < bound:
                return Verdict(ok=False, failing_pair=(u, v))
    return Verdict(ok=True)


def dolev_ut_verify_maxflow(g: Topology, f: int) -> Verdict:
    """Delivery-everywhere check for path dissemination: every pair is
    adjacent, trusted-path connected, or has 2f+1 flow in the node-split
    graph (with the sender's outgoing capacities lifted)."""
    return _verify_maxflow(g, f, 2 * f + 1)


# -------------------------------------------------- simplification checker

def _verify_simplify(g: Topology, f: int, bound: int) -> Verdict:
    fg = compute_f_of_g(g)
    untrusted = sorted(g.untrusted())
    for i, u in enumerate(untrusted):
        for v in untrusted[i + 1:]:
            if fg.has_edge(u, v):
                continue
            if vertex_connectivity(fg, u, v) < bound:
                return Verdict(ok=False, failing_pair=(u, v))
    for ut in sorted(g.trusted):
        gu = compute_g(g, fg, ut)
        for v in untrusted:
            if gu.has_edge(ut, v):
                continue
            if vertex_connectivity(gu, ut, v) < bound:
                return Verdict(ok=False, failing_pair=tuple(sorted((ut, v))))
        for vt in sorted(g.trusted):
            if vt <= ut:
                continue
            guv = compute_g(g, gu, vt)
            if guv.has_edge(ut, vt):
                continue
            if vertex_connectivity(guv, ut, vt) < bound:
                return Verdict(ok=False, failing_pair=(ut, vt))
    return Verdict(ok=True)


def dolev_ut_verify_simplify(g: Topology, f: int) -> Verdict:
    """Same decision as the max-flow checker, reached by collapsing trusted
    chains and measuring plain vertex connectivity per role case."""
    return _verify_simplify(g, f, 2 * f + 1)


# --------------------------------------------------------- flooding variant

def sigflood_t_verify(g: Topology, f: int, method: str = "maxflow") -> Verdict:
    """Signature flooding only needs f+1-fold redundancy: identical sweep
    with every 2f+1 replaced by f+1."""
    if g.authenticated != g.vertex_set():
        raise ValueError("signature flooding assumes every node is authenticated")
    if method == "maxflow":
        return _verify_maxflow(g, f, f + 1)
    if method == "simplify":
        return _verify_simplify(g, f, f + 1)
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------ dual checker

def _root_graph(g: Topology, f: int, bound: int, members):
    dg = build_flow_graph(g, f, bound)
    root = dg.add_vertex()
    for w in sorted(members):
        dg.add_edge(root, 2 * w, bound if w in g.trusted else 1)
    return dg, root


def dualrc_verify(g: Topology, f: int) -> Verdict:
    """Fixpoint over the set of nodes guaranteed to deliver: grow it while
    some node is a neighbor of the broadcaster, draws 2f+1 flow from the
    delivered set, or (when authenticated) f+1 flow from the broadcaster or
    from a delivered trusted authenticated node."""
    bound = 2 * f + 1
    verts = sorted(g.vertex_set())
    trusted_auth = sorted(g.trusted & g.authenticated)
    dg = build_flow_graph(g, f, bound)
    memo = {}

    def dflow(a, b):
        if (a, b) not in memo:
            memo[(a, b)] = max_flow(dg, 2 * a + 1, 2 * b)
        return memo[(a, b)]

    for u in verts:
        covered = {u}
        while True:
            root_dg, root = _root_graph(g, f, bound, covered)
            added = []
            for v in verts:
                if v in covered:
                    continue
                ok = (
                    g.has_edge(u, v)
                    or max_flow(root_dg, root, 2 * v) >= bound
                    or (u in g.authenticated and v in g.authenticated
                        and dflow(u, v) >= f + 1)
                    or (v in g.authenticated
                        and any(t in covered and dflow(t, v) >= f + 1
                                for t in trusted_auth))
                )
                if ok:
                    added.append(v)
            if not added:
                break
            covered.update(added)
        if len(covered) != len(verts):
            missing = min(set(verts) - covered)
            return Verdict(ok=False, failing_pair=(u, missing),
                           failing_broadcaster=u)
    return Verdict(ok=True)


# ------------------------------------------------------------------ oracle

def reachable_set(g: Topology, s: int, corrupted) -> frozenset:
    """Nodes reachable from s once the corrupted nodes are removed."""
    adj = {u: neighbors(g, u) for u in g.vertex_set()}
    seen = {s}
    queue = deque([s])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in corrupted and y not in seen:
                seen.add(y)
                queue.append(y)
    return frozenset(seen)


def dolev_deliverable(g: Topology, f: int, s: int, corrupted) -> frozenset:
    """Graph condition for path dissemination under a silent corruption set:
    a node delivers iff some route from s has an empty trusted-stripped
    interior, or f+1 routes have pairwise disjoint trusted-stripped
    interiors; every route must avoid the corrupted nodes."""
    alive = g.vertex_set() - frozenset(corrupted)
    adj = {u: sorted(neighbors(g, u) & alive) for u in alive}
    interiors = {v: set() for v in alive if v != s}

    def walk(node, seen, interior):
        for w in adj[node]:
            if w in seen:
                continue
            if w != s:
                interiors[w].add(frozenset(strip_trusted(interior, g)))
            walk(w, seen | {w}, interior + (w,))

    walk(s, {s}, ())
    delivered = {s}
    for v, routes in interiors.items():
        nonempty = [r for r in routes if r]
        if frozenset() in routes:
            delivered.add(v)
        elif len(nonempty) > f and has_k_disjoint(nonempty, f + 1):
            delivered.add(v)
    return frozenset(delivered)


def _oracle_expected(g, f, protocol, u, corrupted):
    if protocol == "dolev_ut":
        return dolev_deliverable(g, f, u, corrupted)
    if protocol == "sigflood_t":
        return reachable_set(g, u, corrupted)
    return None


def oracle_check(g: Topology, f: int, protocol: str,
                 size_guard: int = ORACLE_SIZE_GUARD,
                 force: bool = False) -> Verdict:
    """Ground truth at desk scale: simulate every broadcaster against every
    admissible silent corruption set, draining all messages. For the path
    protocols the simulation outcome is additionally checked against the
    direct graph condition; any disagreement raises."""
    if g.n > size_guard and not force:
        raise ValueError(
            f"oracle refused for n={g.n} > {size_guard} (pass force=True to override)")
    opts = OptFlags.all_on() if protocol == "dolev_ut" else OptFlags()
    for u in sorted(g.vertex_set()):
        for corrupted in admissible_corruptions(g, f, u):
            cfg = RunConfig(topology=g, f=f, protocol=protocol, broadcaster=u,
                            corrupted=corrupted, opts=opts)
            rep = run(cfg)
            if rep.error:
                raise RuntimeError(f"oracle run failed: {rep.error}")
            correct = g.vertex_set() - corrupted
            sim_delivered = rep.delivered & correct
            expected = _oracle_expected(g, f, protocol, u, corrupted)
            if expected is not None and sim_delivered != frozenset(expected):
                raise OracleDisagreement(
                    f"broadcaster {u}, corrupted {sorted(corrupted)}: simulator "
                    f"delivered {sorted(sim_delivered)} but the graph condition "
                    f"gives {sorted(expected)}")
            missing = sorted(correct - sim_delivered)
            if missing:
                return Verdict(ok=False, failing_pair=(u, missing[0]),
                               failing_broadcaster=u, witness=corrupted)
    return Verdict(ok=True)


def find_witness(g: Topology, f: int, protocol: str,
                 size_guard: int = ORACLE_SIZE_GUARD, force: bool = False):
    """First (broadcaster, corruption set, starved node) exhibiting a
    validity failure, or None if the protocol succeeds everywhere."""
    verdict = oracle_check(g, f, protocol, size_guard=size_guard, force=force)
    if verdict.ok:
        return None
    return (verdict.failing_broadcaster, verdict.witness, verdict.failing_pair[1])


def verify(g: Topology, f: int, protocol: str, method: str = "maxflow") -> Verdict:
    """Dispatch to the checker for one protocol."""
    if protocol == "dolev_ut":
        if method == "maxflow":
            return dolev_ut_verify_maxflow(g, f)
        if method == "simplify":
            return dolev_ut_verify_simplify(g, f)
        raise ValueError(f"unknown method {method!r}")
    if protocol == "sigflood_t":
        return sigflood_t_verify(g, f, method)
    if protocol == "dualrc":
        return dualrc_verify(g, f)
    raise ValueError(f"unknown protocol {protocol!r}")
