import itertools
import math

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crane.topology import (
    UNBOUNDED,
    DisconnectedError,
    Edge,
    Path,
    Topology,
    TopologyError,
    build_paths,
    load_topology,
    node_paths,
    nsfnet,
    nsfnet_5dc,
    path_capacity,
)

from conftest import line_topology


def test_single_server_has_only_self_path():
    topo = Topology(servers=("s",), server_dc={"s": "D"}, dc_node={"D": "n"}, edges=())
    table = build_paths(topo)
    assert dict(table.paths) == {("s", "s"): Path()}
    assert table.path("s", "s").resources == ()


def test_line_graph_unique_path(line):
    topo, table = line
    assert table.path("a", "c").edges == ("e_ab", "e_bc")
    assert table.g("a", "c", "e_ab") == 1
    assert table.path("c", "a").edges == ("e_bc", "e_ab")
    assert table.g("a", "b", "e_bc") == 0


def _nx_graph(topo):
    g = nx.MultiGraph()
    for e in topo.edges:
        g.add_edge(e.a, e.b, key=e.id)
    return g


def _brute_force(topo, src, dst):
    """Every hop-minimal simple path as an edge-id sequence, smallest first."""
    g = _nx_graph(topo)
    found = []
    for edge_path in nx.all_simple_edge_paths(g, src, dst):
        found.append(tuple(k for _, _, k in edge_path))
    best = min(len(p) for p in found)
    return sorted(p for p in found if len(p) == best)


def test_nsfnet_node1_node8_against_enumeration():
    topo = nsfnet()
    table = build_paths(topo)
    got = table.path("s1", "s8").edges
    minimal = _brute_force(topo, "n1", "n8")
    assert got in minimal
    assert got == minimal[0]


def test_nsfnet_all_pairs_against_enumeration():
    topo = nsfnet()
    paths = node_paths(topo)
    g = _nx_graph(topo)
    for (src, dst), seq in paths.items():
        if src == dst:
            assert seq == ()
            continue
        assert len(seq) == nx.shortest_path_length(g, src, dst)
        assert seq == _brute_force(topo, src, dst)[0]


def test_paths_are_connected_walks():
    topo = nsfnet_5dc()
    table = build_paths(topo)
    ends = {e.id: {e.a, e.b} for e in topo.edges}
    for (i, k), p in table.paths.items():
        node = topo.dc_node[topo.server_dc[i]]
        for eid in p.edges:
            assert node in ends[eid]
            (node,) = ends[eid] - {node}
        if p.edges:
            assert node == topo.dc_node[topo.server_dc[k]]


def test_incidence_matches_path_lists():
    topo = nsfnet_5dc()
    table = build_paths(topo)
    inc = table.incidence()
    for (i, k), p in table.paths.items():
        for r in topo.resources():
            assert table.g(i, k, r) == int(r in p.resources) == inc.get((i, k, r), 0)


def test_same_dc_uses_local_link():
    table = build_paths(nsfnet_5dc())
    p = table.path("DC1-s1", "DC1-s2")
    assert p.edges == () and p.local == "local:DC1"
    assert not p.inter_dc


def test_disconnected_graph_names_pair():
    topo = Topology(
        servers=("a", "b"),
        server_dc={"a": "A", "b": "B"},
        dc_node={"A": "na", "B": "nb"},
        edges=(Edge("e1", "na", "nx", 1.0),),
    )
    with pytest.raises(DisconnectedError) as err:
        build_paths(topo)
    assert "na" in str(err.value) or "nb" in str(err.value)


def test_nonpositive_capacity_rejected():
    with pytest.raises(TopologyError):
        Topology(servers=("a",), server_dc={"a": "A"}, dc_node={"A": "n"}, edges=(Edge("e", "n", "m", 0.0),))


def test_path_capacity_examples():
    caps = {"e1": 10.0, "e2": 5.0}
    assert path_capacity(["e1"], {}, caps) == 10
    assert path_capacity(["e1", "e2"], {"e1": 4.0}, caps) == 5
    assert path_capacity(["e2", "e1"], {"e1": 10.0}, caps) == 0
    assert path_capacity(Path(), {}, caps) == UNBOUNDED


def test_path_capacity_same_dc_uses_intra_capacity():
    topo = nsfnet_5dc(intra_dc_capacity=250.0)
    table = build_paths(topo)
    p = table.path("DC2-s1", "DC2-s3")
    assert path_capacity(p, {"local:DC2": 50.0}, topo.capacities()) == 200.0


def test_zero_load_capacity_is_min_edge():
    topo = nsfnet_5dc()
    caps = topo.capacities()
    for p in build_paths(topo).paths.values():
        expected = min((caps[r] for r in p.resources), default=math.inf)
        assert path_capacity(p, {}, caps) == expected


@settings(max_examples=60, deadline=None)
@given(
    loads=st.lists(st.floats(0, 80), min_size=21, max_size=21),
    bump_edge=st.integers(0, 20),
    bump=st.floats(0, 40),
)
def test_capacity_monotone_in_load(loads, bump_edge, bump):
    topo = nsfnet()
    caps = topo.capacities()
    ids = [e.id for e in topo.edges]
    base = {e: min(x, caps[e]) for e, x in zip(ids, loads)}
    more = dict(base)
    more[ids[bump_edge]] = min(caps[ids[bump_edge]], base[ids[bump_edge]] + bump)
    table = build_paths(topo)
    for p in itertools.islice(table.paths.values(), 0, None, 7):
        assert path_capacity(p, more, caps) <= path_capacity(p, base, caps)


def test_topology_roundtrip(tmp_path):
    topo = nsfnet_5dc()
    f = tmp_path / "t.json"
    topo.dump(f)
    again = load_topology(str(f))
    assert again.servers == topo.servers and again.edges == topo.edges
    assert build_paths(again).paths == build_paths(topo).paths


def test_unknown_preset():
    with pytest.raises(TopologyError):
        load_topology("no-such-thing")


def test_nsfnet_shape():
    topo = nsfnet()
    assert len(topo.nodes) == 14 and len(topo.edges) == 21
    five = nsfnet_5dc()
    assert five.datacenters == ("DC1", "DC2", "DC3", "DC4", "DC5")
    assert len(five.servers) == 25
