"""Small hand-built instances: the three data center walkthrough and tiny
instance families for checking planners against the exhaustive optimum."""

from __future__ import annotations

import itertools
from typing import Iterator

from crane.catalog import Configuration, Instance, PartitionSet
from crane.topology import Edge, Topology

WALKTHROUGH_SERVERS = ("dc1-a", "dc1-b", "dc2-a", "dc2-b", "dc3-a", "dc3-b")


def walkthrough_topology() -> Topology:
    """DC1 and DC2 host the data; DC3 joins. Links are deliberately uneven."""
    return Topology(
        servers=WALKTHROUGH_SERVERS,
        server_dc={s: s.split("-")[0].upper() for s in WALKTHROUGH_SERVERS},
        dc_node={"DC1": "n1", "DC2": "n2", "DC3": "n3"},
        edges=(
            Edge("e12", "n1", "n2", 15.0),
            Edge("e13", "n1", "n3", 20.0),
            Edge("e23", "n2", "n3", 10.0),
        ),
        intra_dc_capacity=100.0,
        name="walkthrough",
    )


def walkthrough_instance() -> Instance:
    """Partitions A-D (300/100/500/200), four replicas each, floor of three.

    Every replica starts on DC1/DC2. The target moves one B and one D replica
    and two C replicas to DC3; A stays put.
    """
    ids = ("A", "B", "C", "D")
    parts = PartitionSet(ids, (300.0, 100.0, 500.0, 200.0), replication=4, availability=3)
    old = ("dc1-a", "dc1-b", "dc2-a", "dc2-b")
    initial = Configuration.from_pairs(WALKTHROUGH_SERVERS, ids, [(s, p) for p in ids for s in old])
    final_holders = {
        "A": old,
        "B": ("dc1-a", "dc1-b", "dc2-a", "dc3-a"),
        "C": ("dc1-a", "dc2-a", "dc3-a", "dc3-b"),
        "D": ("dc1-a", "dc1-b", "dc2-a", "dc3-b"),
    }
    final = Configuration.from_pairs(WALKTHROUGH_SERVERS, ids, [(s, p) for p in ids for s in final_holders[p]])
    return Instance(parts, initial, final, name="walkthrough")


def single_server_dcs(capacities: dict[tuple[int, int], float], n: int = 3, name: str = "tiny") -> Topology:
    """``n`` one-server data centers s1..sn; ``capacities`` maps node pairs to link capacity."""
    servers = tuple(f"s{i}" for i in range(1, n + 1))
    edges = tuple(Edge(f"e{a}{b}", f"n{a}", f"n{b}", float(c)) for (a, b), c in sorted(capacities.items()))
    return Topology(
        servers=servers,
        server_dc={f"s{i}": f"dc{i}" for i in range(1, n + 1)},
        dc_node={f"dc{i}": f"n{i}" for i in range(1, n + 1)},
        edges=edges,
        name=name,
    )


def shared_dc_topology(link: float = 1.0, local: float = 4.0) -> Topology:
    """s1 and s2 share a data center; s3 sits behind a single backbone link."""
    return Topology(
        servers=("s1", "s2", "s3"),
        server_dc={"s1": "dc1", "s2": "dc1", "s3": "dc2"},
        dc_node={"dc1": "n1", "dc2": "n2"},
        edges=(Edge("e12", "n1", "n2", link),),
        intra_dc_capacity=local,
        name="shared-dc",
    )


def asymmetric_sources() -> tuple[Topology, Instance]:
    """Two 10 Gb partitions on s1 and s2; s3 needs both; s1 reaches s3 at 5, s2 at 1."""
    topo = single_server_dcs({(1, 3): 5.0, (2, 3): 1.0, (1, 2): 5.0}, name="asymmetric")
    ids = ("p1", "p2")
    parts = PartitionSet(ids, (10.0, 10.0), replication=2, availability=1)
    servers = topo.servers
    initial = Configuration.from_pairs(servers, ids, [("s1", "p1"), ("s2", "p1"), ("s1", "p2"), ("s2", "p2")])
    final = Configuration.from_pairs(servers, ids, [("s1", "p1"), ("s3", "p1"), ("s1", "p2"), ("s3", "p2")])
    return topo, Instance(parts, initial, final, name="asymmetric")


TINY_TOPOLOGIES = (
    lambda: single_server_dcs({(1, 2): 1.0, (1, 3): 1.0, (2, 3): 1.0}, name="tri-even"),
    lambda: single_server_dcs({(1, 2): 1.0, (1, 3): 2.0, (2, 3): 4.0}, name="tri-skew"),
    lambda: single_server_dcs({(1, 2): 2.0, (2, 3): 1.0}, name="line"),
    shared_dc_topology,
)
TINY_SIZES = {1: ((1.0,), (3.0,), (4.0,)), 2: ((1.0, 4.0), (3.0, 3.0), (4.0, 2.0))}


def tiny_instances(max_creations: int = 3) -> Iterator[tuple[Topology, Instance]]:
    """Every placement pair on three servers with up to two partitions.

    Replication 1 or 2, any floor up to it; only instances with at least one
    and at most ``max_creations`` creations are kept.
    """
    servers = ("s1", "s2", "s3")
    for make in TINY_TOPOLOGIES:
        topo = make()
        for m in (1, 2):
            ids = tuple(f"p{j + 1}" for j in range(m))
            for R in (1, 2):
                spots = list(itertools.combinations(servers, R))
                for init in itertools.product(spots, repeat=m):
                    for fin in itertools.product(spots, repeat=m):
                        created = sum(len(set(f) - set(i)) for i, f in zip(init, fin))
                        if not 1 <= created <= max_creations:
                            continue
                        ini = Configuration.from_pairs(servers, ids, [(s, p) for p, c in zip(ids, init) for s in c])
                        fnl = Configuration.from_pairs(servers, ids, [(s, p) for p, c in zip(ids, fin) for s in c])
                        for A in range(1, R + 1):
                            for sizes in TINY_SIZES[m]:
                                parts = PartitionSet(ids, sizes, replication=R, availability=A)
                                yield topo, Instance(parts, ini, fnl, name=f"{topo.name}")
