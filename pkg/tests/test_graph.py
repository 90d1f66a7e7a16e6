import itertools

import pytest
from hypothesis import given, settings, strategies as st

from relcomm.graph import (
    FlowGraph,
    Topology,
    build_flow_graph,
    compute_f_of_g,
    compute_g,
    find_k_disjoint,
    has_k_disjoint,
    max_flow,
    neighbors,
    normalize_edge,
    strip_trusted,
    strip_trusted_and_tc,
    topology,
    trusted_partition,
    trusted_path_connected,
    vertex_connectivity,
)


def complete(n, **roles):
    return topology(n, itertools.combinations(range(n), 2), **roles)


def cycle(n, **roles):
    return topology(n, [(i, (i + 1) % n) for i in range(n)], **roles)


def line(n, **roles):
    return topology(n, [(i, i + 1) for i in range(n - 1)], **roles)


# ---------------------------------------------------------------- topology

def test_topology_rejects_self_loop():
    with pytest.raises(ValueError):
        Topology(n=3, edges=frozenset({(1, 1)}))


def test_topology_rejects_out_of_range_edge():
    with pytest.raises(ValueError):
        topology(3, [(0, 5)])


def test_topology_rejects_tc_without_auth():
    with pytest.raises(ValueError):
        topology(3, [(0, 1)], tc=[0])
    topology(3, [(0, 1)], authenticated=[0], tc=[0])


def test_trusted_may_overlap_any_role():
    g = topology(4, [(0, 1)], authenticated=[0, 1], trusted=[1, 2], tc=[0])
    assert g.trusted & g.authenticated == {1}


# --------------------------------------------------------------- neighbors

def test_neighbors_triangle():
    g = complete(3)
    assert neighbors(g, 0) == {1, 2}


def test_neighbors_isolated():
    g = topology(3)
    assert neighbors(g, 1) == frozenset()


def test_neighbors_out_of_range():
    with pytest.raises(ValueError):
        neighbors(topology(3), 7)


def test_neighbors_symmetric():
    g = topology(5, [(0, 1), (1, 3), (2, 4)])
    for u in range(5):
        for v in neighbors(g, u):
            assert u in neighbors(g, v)


# ------------------------------------------------------- trusted partition

def test_partition_single_trusted_bridge():
    g = line(3, trusted=[1])
    uf = trusted_partition(g)
    assert uf.together(0, 2)


def test_partition_no_trusted_all_singletons():
    g = line(4)
    uf = trusted_partition(g)
    assert all(len(c) == 1 for c in uf.classes())


def test_partition_two_disjoint_trusted_chains():
    # 0-4-1 and 2-5-3 with trusted 4, 5 never joined
    g = topology(6, [(0, 4), (4, 1), (2, 5), (5, 3)], trusted=[4, 5])
    uf = trusted_partition(g)
    assert uf.together(0, 1) and uf.together(2, 3)
    assert not uf.together(0, 2)


# ------------------------------------------------- trusted path reachability

def test_trusted_path_direct_chain():
    g = line(3, trusted=[1])
    assert trusted_path_connected(g, 0, 2)


def test_trusted_path_broken_by_untrusted_gap():
    # 0-1-2-3-4 with 1 and 3 trusted but 2 untrusted: no all-trusted interior
    g = line(5, trusted=[1, 3])
    assert trusted_path_connected(g, 0, 2)
    assert trusted_path_connected(g, 2, 4)
    assert not trusted_path_connected(g, 0, 4)


def test_trusted_path_ignores_direct_edge():
    g = topology(2, [(0, 1)])
    assert not trusted_path_connected(g, 0, 1)


# ------------------------------------------------------------------- f(G)

def test_f_of_g_collapses_trusted_line():
    g = line(3, trusted=[1])
    fg = compute_f_of_g(g)
    assert fg.vertex_set() == {0, 2}
    assert fg.edges == {(0, 2)}


def test_f_of_g_without_trusted_is_induced_subgraph():
    g = topology(4, [(0, 1), (1, 2), (2, 3)])
    fg = compute_f_of_g(g)
    assert fg.edges == g.edges
    assert fg.vertex_set() == g.vertex_set()


def brute_f_edges(g):
    """Definition-level reference: direct edge or nonempty all-trusted path."""
    untrusted = sorted(g.untrusted())
    out = set()
    for u, v in itertools.combinations(untrusted, 2):
        if g.has_edge(u, v) or _brute_trusted_path(g, u, v):
            out.add((u, v))
    return out


def _brute_trusted_path(g, u, v):
    # BFS from u through trusted nodes only
    frontier = [t for t in neighbors(g, u) if t in g.trusted]
    seen = set(frontier)
    while frontier:
        nxt = []
        for t in frontier:
            if v in neighbors(g, t):
                return True
            for w in neighbors(g, t):
                if w in g.trusted and w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return False


def test_f_of_g_matches_bruteforce_on_mixed_graph():
    g = topology(
        7,
        [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (1, 4), (0, 6)],
        trusted=[1, 4, 5],
    )
    assert compute_f_of_g(g).edges == frozenset(brute_f_edges(g))


def test_f_of_g_untrusted_sandwich_does_not_bridge():
    # 0-1-2-3-4, trusted 1 and 3: node 2 sits between two trusted islands,
    # so 0 and 4 must not become neighbors
    g = line(5, trusted=[1, 3])
    fg = compute_f_of_g(g)
    assert (0, 2) in fg.edges and (2, 4) in fg.edges
    assert (0, 4) not in fg.edges


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_f_of_g_bruteforce_property(data):
    n = data.draw(st.integers(2, 7))
    pairs = list(itertools.combinations(range(n), 2))
    edges = [p for p in pairs if data.draw(st.booleans())]
    trusted = data.draw(st.sets(st.integers(0, n - 1), max_size=n))
    g = topology(n, edges, trusted=trusted)
    fg = compute_f_of_g(g)
    assert fg.edges == frozenset(brute_f_edges(g))
    assert all(u in g.untrusted() and v in g.untrusted() for u, v in fg.edges)


# ------------------------------------------------------------------- g(.)

def test_compute_g_inserts_trusted_node():
    g = line(3, trusted=[1])
    sub = compute_f_of_g(g)
    out = compute_g(g, sub, 1)
    assert out.vertex_set() == {0, 1, 2}
    assert (0, 1) in out.edges and (1, 2) in out.edges and (0, 2) in out.edges


def test_compute_g_isolated_trusted_node():
    g = topology(3, [(0, 2)], trusted=[1])
    sub = compute_f_of_g(g)
    out = compute_g(g, sub, 1)
    assert out.vertex_set() == {0, 1, 2}
    assert out.edges == {(0, 2)}


def test_compute_g_through_trusted_chain():
    # 0-1-2 with 1, 2 trusted; insert 2 into the singleton subgraph {0}
    g = line(3, trusted=[1, 2])
    sub = topology(3, [], vertices=[0])
    out = compute_g(g, sub, 2)
    assert (0, 2) in out.edges


def test_compute_g_rejects_untrusted_insert():
    g = line(3, trusted=[1])
    sub = compute_f_of_g(g)
    with pytest.raises(ValueError):
        compute_g(g, sub, 0)


def test_compute_g_rejects_present_node():
    g = line(3, trusted=[1, 2])
    sub = compute_g(g, compute_f_of_g(g), 1)
    with pytest.raises(ValueError):
        compute_g(g, sub, 1)


# ------------------------------------------------------------- flow graphs

def test_build_flow_graph_single_edge_unit_caps():
    g = topology(2, [(0, 1)])
    fg = build_flow_graph(g, 1, 3)
    assert fg.size == 4
    assert fg.capacity(0, 1) == 1 and fg.capacity(2, 3) == 1
    assert fg.capacity(1, 2) == 1 and fg.capacity(3, 0) == 1


def test_build_flow_graph_trusted_origin_gets_boosted_caps():
    g = topology(2, [(0, 1)], trusted=[0])
    fg = build_flow_graph(g, 1, 3)
    assert fg.capacity(0, 1) == 3  # internal edge of the trusted node
    assert fg.capacity(1, 2) == 3  # edge originating at the trusted node
    assert fg.capacity(3, 0) == 1


def test_build_flow_graph_k4_shape():
    g = complete(4)
    fg = build_flow_graph(g, 1, 3)
    assert fg.size == 8
    caps = fg.edges()
    assert len(caps) == 4 + 12
    assert all(c == 1 for c in caps.values())


def test_build_flow_graph_rejects_odd_capacity():
    with pytest.raises(ValueError):
        build_flow_graph(topology(2, [(0, 1)]), 1, 7)


def test_flow_graph_in_node_single_outgoing_edge():
    g = topology(3, [(0, 1), (1, 2)], trusted=[1])
    fg = build_flow_graph(g, 1, 3)
    for u in range(3):
        outgoing = [e for e in fg.edges() if e[0] == 2 * u]
        assert outgoing == [(2 * u, 2 * u + 1)]


# ----------------------------------------------------------------- max flow

def test_max_flow_k4():
    fg = build_flow_graph(complete(4), 0, 1)
    assert max_flow(fg, 1, 6) == 3  # out(0) -> in(3): three disjoint routes


def test_max_flow_c4_opposite():
    fg = build_flow_graph(cycle(4), 0, 1)
    assert max_flow(fg, 1, 4) == 2


def test_max_flow_disconnected():
    g = topology(3, [(0, 1)])
    fg = build_flow_graph(g, 0, 1)
    assert max_flow(fg, 1, 4) == 0


def test_max_flow_validates_endpoints():
    fg = build_flow_graph(complete(3), 0, 1)
    with pytest.raises(ValueError):
        max_flow(fg, 2, 2)
    with pytest.raises(ValueError):
        max_flow(fg, 0, 99)


def test_max_flow_does_not_mutate():
    fg = build_flow_graph(complete(4), 0, 1)
    before = fg.edges()
    max_flow(fg, 1, 6)
    assert fg.edges() == before


# -------------------------------------------------------------- connectivity

def brute_disjoint_path_count(g, u, v):
    """Reference count of internally vertex-disjoint u-v paths."""
    interiors = []
    _dfs_paths(g, u, v, (u,), interiors)
    best = 0
    for k in range(len(interiors), 0, -1):
        for combo in itertools.combinations(interiors, k):
            seen = set()
            ok = True
            for c in combo:
                if seen & set(c):
                    ok = False
                    break
                seen |= set(c)
            if ok:
                return k
    return best


def _dfs_paths(g, cur, target, prefix, out):
    if cur == target:
        out.append(prefix[1:-1])
        return
    for w in sorted(neighbors(g, cur)):
        if w not in prefix:
            _dfs_paths(g, w, target, prefix + (w,), out)


def test_vertex_connectivity_k4():
    g = complete(4)
    assert vertex_connectivity(g, 0, 3) == 3


def test_vertex_connectivity_c4():
    g = cycle(4)
    assert vertex_connectivity(g, 0, 2) == 2


def test_vertex_connectivity_disconnected():
    g = topology(4, [(0, 1), (2, 3)])
    assert vertex_connectivity(g, 0, 3) == 0


def test_vertex_connectivity_same_node_rejected():
    with pytest.raises(ValueError):
        vertex_connectivity(complete(3), 1, 1)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_vertex_connectivity_matches_enumeration(data):
    n = data.draw(st.integers(2, 6))
    pairs = list(itertools.combinations(range(n), 2))
    edges = [p for p in pairs if data.draw(st.booleans())]
    g = topology(n, edges)
    u = data.draw(st.integers(0, n - 1))
    v = data.draw(st.integers(0, n - 1))
    if u == v:
        return
    assert vertex_connectivity(g, u, v) == brute_disjoint_path_count(g, u, v)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_flow_symmetry_between_split_endpoints(data):
    n = data.draw(st.integers(2, 6))
    pairs = list(itertools.combinations(range(n), 2))
    edges = [p for p in pairs if data.draw(st.booleans())]
    trusted = data.draw(st.sets(st.integers(0, n - 1), max_size=n))
    f = data.draw(st.integers(0, 2))
    g = topology(n, edges, trusted=trusted)
    fg = build_flow_graph(g, f, 2 * f + 1)
    u = data.draw(st.integers(0, n - 1))
    v = data.draw(st.integers(0, n - 1))
    if u == v:
        return
    assert max_flow(fg, 2 * u + 1, 2 * v) == max_flow(fg, 2 * v + 1, 2 * u)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_edge_monotonicity_of_flow(data):
    n = data.draw(st.integers(3, 6))
    pairs = list(itertools.combinations(range(n), 2))
    edges = {p for p in pairs if data.draw(st.booleans())}
    missing = [p for p in pairs if p not in edges]
    if not missing:
        return
    extra = data.draw(st.sampled_from(missing))
    trusted = data.draw(st.sets(st.integers(0, n - 1), max_size=n))
    g1 = topology(n, edges, trusted=trusted)
    g2 = topology(n, edges | {extra}, trusted=trusted)
    u = data.draw(st.integers(0, n - 1))
    v = data.draw(st.integers(0, n - 1))
    if u == v:
        return
    f1 = build_flow_graph(g1, 1, 3)
    f2 = build_flow_graph(g2, 1, 3)
    assert max_flow(f2, 2 * u + 1, 2 * v) >= max_flow(f1, 2 * u + 1, 2 * v)
    assert vertex_connectivity(g2, u, v) >= vertex_connectivity(g1, u, v)


# ------------------------------------------------------------ path stripping

def test_strip_trusted_basic():
    g = topology(5, [(0, 1)], trusted=[4])
    assert strip_trusted((2, 4, 3), g) == (2, 3)


def test_strip_trusted_all_trusted_becomes_empty():
    g = topology(4, [], trusted=[1, 2])
    assert strip_trusted((1, 2), g) == ()


def test_strip_trusted_empty_input():
    assert strip_trusted((), topology(3)) == ()


def test_strip_trusted_idempotent_and_order_preserving():
    g = topology(6, [], trusted=[0, 3])
    p = (5, 0, 2, 3, 1)
    once = strip_trusted(p, g)
    assert once == (5, 2, 1)
    assert strip_trusted(once, g) == once


def test_strip_trusted_and_tc():
    g = topology(4, [], authenticated=[2], trusted=[1], tc=[2])
    assert strip_trusted_and_tc((0, 2), g) == (0,)
    assert strip_trusted_and_tc((1, 2), g) == ()
    assert strip_trusted_and_tc((0, 3), g) == (0, 3)


# ------------------------------------------------------------- disjointness

def test_has_k_disjoint_singletons():
    assert has_k_disjoint({(2,), (3,)}, 2)


def test_has_k_disjoint_shared_node():
    assert not has_k_disjoint({(2, 5), (3, 5)}, 2)


def test_has_k_disjoint_rejects_empty_member():
    with pytest.raises(ValueError):
        has_k_disjoint({(), (1,)}, 1)


def brute_has_k_disjoint(paths, k):
    sets = [set(p) for p in paths]
    for combo in itertools.combinations(range(len(sets)), k):
        union = set()
        total = 0
        for i in combo:
            union |= sets[i]
            total += len(sets[i])
        if len(union) == total:
            return True
    return False


def test_has_k_disjoint_matches_bruteforce_fixed():
    paths = {(1, 2), (3, 4), (2, 5), (6,), (7, 1, 3)}
    for k in range(1, 5):
        assert has_k_disjoint(paths, k) == brute_has_k_disjoint(paths, k)


@settings(max_examples=80, deadline=None)
@given(
    st.sets(
        st.lists(st.integers(0, 7), min_size=1, max_size=4, unique=True).map(tuple),
        min_size=1,
        max_size=6,
    ),
    st.integers(1, 4),
)
def test_has_k_disjoint_bruteforce_property(paths, k):
    assert has_k_disjoint(paths, k) == brute_has_k_disjoint(paths, k)


@settings(max_examples=60, deadline=None)
@given(
    st.sets(
        st.lists(st.integers(0, 7), min_size=1, max_size=4, unique=True).map(tuple),
        min_size=2,
        max_size=6,
    ),
    st.integers(1, 3),
)
def test_has_k_disjoint_monotone_in_path_set(paths, k):
    smaller = set(sorted(paths)[:-1])
    if not smaller:
        return
    if has_k_disjoint(smaller, k):
        assert has_k_disjoint(paths, k)


def test_find_k_disjoint_returns_witness():
    witness = find_k_disjoint({(1, 2), (3,), (2, 4)}, 2)
    assert witness is not None
    a, b = witness
    assert not a & b


def test_normalize_edge_rejects_loop():
    with pytest.raises(ValueError):
        normalize_edge(2, 2)
