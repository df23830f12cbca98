"""Server/backbone graph, hop-count shortest paths and bottleneck capacities.

Servers live in data centers; data centers sit on backbone nodes. A transfer
between two servers of different data centers follows the backbone path
between their nodes. Transfers inside one data center use a virtual local
link (one per data center) of capacity ``intra_dc_capacity``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Mapping, Sequence

UNBOUNDED = math.inf

LOCAL_PREFIX = "local:"


class TopologyError(ValueError):
    pass


class DisconnectedError(TopologyError):
    def __init__(self, src: str, dst: str):
        super().__init__(f"no path between {src!r} and {dst!r}")
        self.pair = (src, dst)


@dataclass(frozen=True)
class Edge:
    id: str
    a: str
    b: str
    capacity: float  # gigabits per minute


@dataclass(frozen=True)
class Topology:
    servers: tuple[str, ...]
    server_dc: Mapping[str, str]
    dc_node: Mapping[str, str]
    edges: tuple[Edge, ...]
    intra_dc_capacity: float = 1000.0
    name: str = "custom"

    def __post_init__(self):
        if len(set(self.servers)) != len(self.servers):
            raise TopologyError("duplicate server ids")
        for s in self.servers:
            if s not in self.server_dc:
                raise TopologyError(f"server {s!r} has no data center")
            if self.server_dc[s] not in self.dc_node:
                raise TopologyError(f"server {s!r} references unknown data center {self.server_dc[s]!r}")
        ids = [e.id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise TopologyError("duplicate edge ids")
        for e in self.edges:
            if not e.capacity > 0:
                raise TopologyError(f"edge {e.id!r} has non-positive capacity")
            if e.a == e.b:
                raise TopologyError(f"edge {e.id!r} is a self loop")
        if not self.intra_dc_capacity > 0:
            raise TopologyError("intra_dc_capacity must be positive")

    @property
    def datacenters(self) -> tuple[str, ...]:
        return tuple(self.dc_node)

    @property
    def nodes(self) -> tuple[str, ...]:
        seen = dict.fromkeys(self.dc_node.values())
        for e in self.edges:
            seen.setdefault(e.a)
            seen.setdefault(e.b)
        return tuple(seen)

    def dc_of(self, server: str) -> str:
        return self.server_dc[server]

    def servers_in(self, dc: str) -> list[str]:
        return [s for s in self.servers if self.server_dc[s] == dc]

    def server_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.servers)}

    def local_link(self, dc: str) -> str:
        return LOCAL_PREFIX + dc

    def resources(self) -> list[str]:
        """Capacitated resources: backbone edges, then the local link of every
        data center hosting at least two servers."""
        out = [e.id for e in self.edges]
        for dc in self.dc_node:
            if len(self.servers_in(dc)) >= 2:
                out.append(self.local_link(dc))
        return out

    def capacities(self) -> dict[str, float]:
        caps = {e.id: e.capacity for e in self.edges}
        for r in self.resources():
            if r.startswith(LOCAL_PREFIX):
                caps[r] = self.intra_dc_capacity
        return caps

    def restrict(self, dcs: Sequence[str]) -> "Topology":
        """Same backbone, only the servers of ``dcs``."""
        keep = set(dcs)
        servers = tuple(s for s in self.servers if self.server_dc[s] in keep)
        return Topology(
            servers=servers,
            server_dc={s: self.server_dc[s] for s in servers},
            dc_node={d: n for d, n in self.dc_node.items() if d in keep},
            edges=self.edges,
            intra_dc_capacity=self.intra_dc_capacity,
            name=f"{self.name}[{','.join(dcs)}]",
        )

    # serialization

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "intra_dc_capacity": self.intra_dc_capacity,
            "datacenters": [{"id": d, "node": n} for d, n in self.dc_node.items()],
            "servers": [{"id": s, "dc": self.server_dc[s]} for s in self.servers],
            "edges": [{"id": e.id, "a": e.a, "b": e.b, "capacity": e.capacity} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        try:
            dc_node = {d["id"]: d.get("node", d["id"]) for d in data["datacenters"]}
            servers = tuple(s["id"] for s in data["servers"])
            server_dc = {s["id"]: s["dc"] for s in data["servers"]}
            edges = tuple(
                Edge(str(e["id"]), str(e["a"]), str(e["b"]), float(e["capacity"])) for e in data["edges"]
            )
        except KeyError as exc:
            raise TopologyError(f"topology file is missing field {exc}") from None
        return cls(
            servers=servers,
            server_dc=server_dc,
            dc_node=dc_node,
            edges=edges,
            intra_dc_capacity=float(data.get("intra_dc_capacity", 1000.0)),
            name=data.get("name", "custom"),
        )

    def dump(self, path) -> None:
        FsPath(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Topology":
        return cls.from_dict(json.loads(FsPath(path).read_text()))


@dataclass(frozen=True)
class Path:
    """Route of one server pair.

    ``edges`` are backbone edges; ``local`` names the local link when both
    servers share a data center. A self pair has neither.
    """

    edges: tuple[str, ...] = ()
    local: str | None = None

    @property
    def resources(self) -> tuple[str, ...]:
        return self.edges + ((self.local,) if self.local else ())

    @property
    def inter_dc(self) -> bool:
        return bool(self.edges)


@dataclass(frozen=True)
class PathTable:
    topology: Topology
    paths: Mapping[tuple[str, str], Path] = field(repr=False)

    def __getitem__(self, pair: tuple[str, str]) -> Path:
        return self.paths[pair]

    def path(self, src: str, dst: str) -> Path:
        return self.paths[(src, dst)]

    def g(self, src: str, dst: str, resource: str) -> int:
        return int(resource in self.paths[(src, dst)].resources)

    def incidence(self) -> dict[tuple[str, str, str], int]:
        """Sparse g_{i,k,e}: only the ones."""
        return {(i, k, r): 1 for (i, k), p in self.paths.items() for r in p.resources}


def _adjacency(topology: Topology) -> dict[str, list[tuple[str, str]]]:
    adj: dict[str, list[tuple[str, str]]] = {n: [] for n in topology.nodes}
    for e in topology.edges:
        adj[e.a].append((e.id, e.b))
        adj[e.b].append((e.id, e.a))
    for n in adj:
        adj[n].sort()
    return adj


def _hops_to(adj, target: str) -> dict[str, int]:
    dist = {target: 0}
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for _, v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def node_paths(topology: Topology) -> dict[tuple[str, str], tuple[str, ...]]:
    """Hop-minimal edge sequence for every pair of data-center nodes.

    Among minimal paths the lexicographically smallest edge-id sequence wins:
    walking from the source, always take the smallest edge id that stays on
    some minimal path.
    """
    adj = _adjacency(topology)
    dc_nodes = sorted(set(topology.dc_node.values()))
    out = {}
    for dst in dc_nodes:
        dist = _hops_to(adj, dst)
        for src in dc_nodes:
            if src not in dist:
                raise DisconnectedError(src, dst)
            seq = []
            u = src
            while u != dst:
                eid, v = min((eid, v) for eid, v in adj[u] if dist.get(v, -1) == dist[u] - 1)
                seq.append(eid)
                u = v
            out[(src, dst)] = tuple(seq)
    return out


def build_paths(topology: Topology) -> PathTable:
    between = node_paths(topology)
    # lone or single-DC setups must still be fully connected as a backbone graph
    adj = _adjacency(topology)
    if adj:
        start = next(iter(adj))
        reach = _hops_to(adj, start)
        for n in adj:
            if n not in reach:
                raise DisconnectedError(start, n)
    paths = {}
    for i in topology.servers:
        di = topology.server_dc[i]
        for k in topology.servers:
            dk = topology.server_dc[k]
            if i == k:
                paths[(i, k)] = Path()
            elif di == dk:
                paths[(i, k)] = Path(local=topology.local_link(di))
            else:
                paths[(i, k)] = Path(edges=between[(topology.dc_node[di], topology.dc_node[dk])])
    return PathTable(topology, paths)


def path_capacity(path: Path | Sequence[str], loads: Mapping[str, float], capacities: Mapping[str, float]) -> float:
    """Residual bottleneck of ``path``; ``UNBOUNDED`` for an empty path."""
    resources = path.resources if isinstance(path, Path) else tuple(path)
    if not resources:
        return UNBOUNDED
    return max(0.0, min(capacities[r] - loads.get(r, 0.0) for r in resources))


# NSFNet, 14 nodes / 21 links (the commonly used T1 backbone link list).
NSFNET_LINKS = [
    (1, 2), (1, 3), (1, 8), (2, 3), (2, 4), (3, 6), (4, 5), (4, 11), (5, 6), (5, 7), (6, 10),
    (6, 14), (7, 8), (8, 9), (9, 10), (9, 12), (9, 13), (11, 12), (11, 13), (12, 14), (13, 14),
]
# Capacities are not published with the evaluation setup; fixed heterogeneous values.
NSFNET_CAPACITY_PATTERN = (40.0, 60.0, 80.0)
NSFNET_DC_SITES = ("n1", "n5", "n9", "n11", "n14")


def nsfnet_edges(capacity_pattern=NSFNET_CAPACITY_PATTERN) -> tuple[Edge, ...]:
    return tuple(
        Edge(f"e{idx + 1:02d}", f"n{a}", f"n{b}", capacity_pattern[idx % len(capacity_pattern)])
        for idx, (a, b) in enumerate(NSFNET_LINKS)
    )


def nsfnet(intra_dc_capacity: float = 1000.0) -> Topology:
    """One single-server data center on each of the 14 NSFNet nodes."""
    dcs = {f"dc{n}": f"n{n}" for n in range(1, 15)}
    servers = tuple(f"s{n}" for n in range(1, 15))
    return Topology(
        servers=servers,
        server_dc={f"s{n}": f"dc{n}" for n in range(1, 15)},
        dc_node=dcs,
        edges=nsfnet_edges(),
        intra_dc_capacity=intra_dc_capacity,
        name="nsfnet",
    )


def nsfnet_5dc(servers_per_dc: int = 5, intra_dc_capacity: float = 1000.0) -> Topology:
    """Five data centers of ``servers_per_dc`` servers on NSFNet; ``DC5`` is the newcomer."""
    dc_node = {f"DC{i + 1}": node for i, node in enumerate(NSFNET_DC_SITES)}
    server_dc = {}
    for dc in dc_node:
        for j in range(servers_per_dc):
            server_dc[f"{dc}-s{j + 1}"] = dc
    return Topology(
        servers=tuple(server_dc),
        server_dc=server_dc,
        dc_node=dc_node,
        edges=nsfnet_edges(),
        intra_dc_capacity=intra_dc_capacity,
        name="nsfnet-5dc",
    )


PRESETS = {"nsfnet": nsfnet, "nsfnet-5dc": nsfnet_5dc}


def load_topology(name: str) -> Topology:
    """A preset name or a path to a topology JSON file."""
    if name in PRESETS:
        return PRESETS[name]()
    if FsPath(name).exists():
        return Topology.load(name)
    raise TopologyError(f"unknown topology preset or file: {name!r}")
