"""Partitions, placements, configuration diffs and evaluation scenarios."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Iterable, Sequence

import numpy as np

from crane.topology import Topology


class CatalogError(ValueError):
    pass


class InsufficientCapacityError(CatalogError):
    def __init__(self, partition: str):
        super().__init__(f"not enough disk capacity to place partition {partition!r}")
        self.partition = partition


@dataclass(frozen=True)
class PartitionSet:
    ids: tuple[str, ...]
    sizes: tuple[float, ...]  # gigabits
    replication: int
    availability: int  # minimum number of complete replicas

    def __post_init__(self):
        if len(self.ids) != len(self.sizes):
            raise CatalogError("ids and sizes differ in length")
        if len(set(self.ids)) != len(self.ids):
            raise CatalogError("duplicate partition ids")
        if any(not s > 0 for s in self.sizes):
            raise CatalogError("partition sizes must be positive")
        if not 1 <= self.availability <= self.replication:
            raise CatalogError("need 1 <= availability <= replication")

    def __len__(self):
        return len(self.ids)

    def size_of(self, pid: str) -> float:
        return self.sizes[self.ids.index(pid)]

    def size_map(self) -> dict[str, float]:
        return dict(zip(self.ids, self.sizes))


class Configuration:
    """Binary server x partition placement."""

    def __init__(self, servers: Sequence[str], partitions: Sequence[str], matrix=None):
        self.servers = tuple(servers)
        self.partitions = tuple(partitions)
        if matrix is None:
            matrix = np.zeros((len(self.servers), len(self.partitions)), dtype=bool)
        m = np.array(matrix, dtype=bool)
        if m.shape != (len(self.servers), len(self.partitions)):
            raise CatalogError(f"matrix shape {m.shape} does not match {len(self.servers)}x{len(self.partitions)}")
        m.flags.writeable = False
        self.matrix = m

    @classmethod
    def from_pairs(cls, servers, partitions, pairs: Iterable[tuple[str, str]]) -> "Configuration":
        s_idx = {s: i for i, s in enumerate(servers)}
        p_idx = {p: j for j, p in enumerate(partitions)}
        m = np.zeros((len(servers), len(partitions)), dtype=bool)
        for s, p in pairs:
            if s not in s_idx or p not in p_idx:
                raise CatalogError(f"unknown placement pair ({s!r}, {p!r})")
            m[s_idx[s], p_idx[p]] = True
        return cls(servers, partitions, m)

    def pairs(self) -> list[tuple[str, str]]:
        rows, cols = np.nonzero(self.matrix)
        return [(self.servers[i], self.partitions[j]) for i, j in zip(rows, cols)]

    def holders(self, pid: str) -> list[str]:
        j = self.partitions.index(pid)
        return [self.servers[i] for i in np.flatnonzero(self.matrix[:, j])]

    def column_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def __contains__(self, pair) -> bool:
        s, p = pair
        return bool(self.matrix[self.servers.index(s), self.partitions.index(p)])

    def __eq__(self, other):
        return (
            isinstance(other, Configuration)
            and self.servers == other.servers
            and self.partitions == other.partitions
            and np.array_equal(self.matrix, other.matrix)
        )

    def __repr__(self):
        return f"Configuration({len(self.servers)} servers, {len(self.partitions)} partitions, {int(self.matrix.sum())} replicas)"


@dataclass(frozen=True)
class MigrationDemand:
    creations: frozenset[tuple[str, str]]  # (destination server, partition)
    deletions: frozenset[tuple[str, str]]  # (server, partition)

    def __bool__(self):
        return bool(self.creations or self.deletions)

    def creations_of(self, pid: str) -> list[str]:
        return sorted(k for k, j in self.creations if j == pid)

    def deletions_of(self, pid: str) -> list[str]:
        return sorted(k for k, j in self.deletions if j == pid)


def diff(initial: Configuration, final: Configuration) -> MigrationDemand:
    if initial.servers != final.servers or initial.partitions != final.partitions:
        raise CatalogError("configurations cover different servers or partitions")
    ci, cf = initial.matrix, final.matrix
    create = np.argwhere(cf & ~ci)
    delete = np.argwhere(ci & ~cf)
    s, p = initial.servers, initial.partitions
    return MigrationDemand(
        creations=frozenset((s[i], p[j]) for i, j in create),
        deletions=frozenset((s[i], p[j]) for i, j in delete),
    )


def apply_demand(initial: Configuration, demand: MigrationDemand) -> Configuration:
    """All creations, then all deletions."""
    pairs = set(initial.pairs()) | set(demand.creations)
    pairs -= set(demand.deletions)
    return Configuration.from_pairs(initial.servers, initial.partitions, pairs)


def default_disk_capacities(partitions: PartitionSet, servers: Sequence[str], slack: float = 1.5) -> dict[str, float]:
    total = sum(partitions.sizes) * partitions.replication
    per = total * slack / len(servers)
    return {s: per for s in servers}


def place_as_unique_as_possible(
    partitions: PartitionSet,
    topology: Topology,
    disk_capacities: dict[str, float] | None = None,
    seed: int = 0,
) -> Configuration:
    """Spread each partition's replicas over data centers first, then servers.

    Stand-in for Swift's ring placement. Replica by replica, pick the data
    center holding the fewest copies of the partition (ties: least used
    fraction of disk, then a seeded random rank), then the least used server
    in it that has room and no copy yet.
    """
    servers = topology.servers
    if disk_capacities is None:
        disk_capacities = default_disk_capacities(partitions, servers)
    rng = np.random.default_rng(seed)
    placer = _Placer(topology, disk_capacities, rng, len(partitions))
    for j, (pid, size) in enumerate(zip(partitions.ids, partitions.sizes)):
        for _ in range(partitions.replication):
            placer.place(j, pid, size)
    return Configuration(servers, partitions.ids, placer.m)


class _Placer:
    def __init__(self, topology: Topology, caps: dict[str, float], rng, n_parts: int):
        self.topology = topology
        self.caps = caps
        self.servers = topology.servers
        self.s_idx = {s: i for i, s in enumerate(self.servers)}
        dcs = list(topology.datacenters)
        self.dc_rank = dict(zip(dcs, rng.permutation(len(dcs))))
        self.srv_rank = dict(zip(self.servers, rng.permutation(len(self.servers))))
        self.used = {s: 0.0 for s in self.servers}
        self.dc_cap = {d: sum(caps[s] for s in topology.servers_in(d)) for d in dcs}
        self.dc_used = {d: 0.0 for d in dcs}
        self.m = np.zeros((len(self.servers), n_parts), dtype=bool)

    def add(self, s: str, j: int, size: float) -> None:
        self.m[self.s_idx[s], j] = True
        self.used[s] += size
        self.dc_used[self.topology.server_dc[s]] += size

    def remove(self, s: str, j: int, size: float) -> None:
        self.m[self.s_idx[s], j] = False
        self.used[s] -= size
        self.dc_used[self.topology.server_dc[s]] -= size

    def place(self, j: int, pid: str, size: float) -> str:
        dc_of = self.topology.server_dc
        copies: dict[str, int] = {}
        for i in np.flatnonzero(self.m[:, j]):
            d = dc_of[self.servers[i]]
            copies[d] = copies.get(d, 0) + 1
        fits = [s for s in self.servers if not self.m[self.s_idx[s], j] and self.used[s] + size <= self.caps[s] + 1e-9]
        if not fits:
            raise InsufficientCapacityError(pid)

        def key(s):
            d = dc_of[s]
            return (
                copies.get(d, 0),
                self.dc_used[d] / self.dc_cap[d],
                self.dc_rank[d],
                self.used[s] / self.caps[s],
                self.srv_rank[s],
            )

        best = min(fits, key=key)
        self.add(best, j, size)
        return best


def rebalance(
    current: Configuration,
    partitions: PartitionSet,
    topology: Topology,
    disk_capacities: dict[str, float] | None = None,
    seed: int = 0,
) -> Configuration:
    """Recompute placement after servers were added, moving as little as possible.

    Servers holding more than their capacity-proportional share give up
    replicas (seeded order, at most one replica per partition per rebalance),
    which are then re-placed as uniquely as possible.
    """
    servers = topology.servers
    if disk_capacities is None:
        disk_capacities = default_disk_capacities(partitions, servers)
    if current.servers != servers or current.partitions != partitions.ids:
        raise CatalogError("current configuration does not match topology/partitions")
    rng = np.random.default_rng(seed)
    placer = _Placer(topology, disk_capacities, rng, len(partitions))
    sizes = partitions.sizes
    for i, j in zip(*np.nonzero(current.matrix)):
        placer.add(servers[i], j, sizes[j])
    total = sum(sizes) * partitions.replication
    cap_sum = sum(disk_capacities[s] for s in servers)
    share = {s: total * disk_capacities[s] / cap_sum for s in servers}

    moved: set[int] = set()
    gathered: list[int] = []
    for s in sorted(servers, key=lambda s: placer.srv_rank[s]):
        if placer.used[s] <= share[s]:
            continue
        held = np.flatnonzero(placer.m[placer.s_idx[s]])
        for j in rng.permutation(held):
            if placer.used[s] - sizes[j] / 2 <= share[s]:
                break
            if j in moved:
                continue
            placer.remove(s, j, sizes[j])
            moved.add(j)
            gathered.append(j)
    for j in gathered:
        placer.place(j, partitions.ids[j], sizes[j])
    return Configuration(servers, partitions.ids, placer.m)


# Deployment scenarios: partition count, size range (Gb), reference replicas-to-migrate count.
SCENARIOS = {
    1: (512, (50, 100), 656),
    2: (1024, (20, 50), 1316),
    3: (2048, (20, 50), 2632),
    4: (4094, (10, 20), 5264),
}


@dataclass(frozen=True)
class Instance:
    partitions: PartitionSet
    initial: Configuration
    final: Configuration
    name: str = "instance"

    @property
    def servers(self) -> tuple[str, ...]:
        return self.initial.servers

    def demand(self) -> MigrationDemand:
        return diff(self.initial, self.final)

    def check(self) -> None:
        """Raise when some partition starts below the availability floor."""
        low = [
            p for p, c in zip(self.partitions.ids, self.initial.column_sums()) if c < self.partitions.availability
        ]
        if low:
            raise CatalogError(f"partitions below availability floor initially: {low[:5]}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "replication": self.partitions.replication,
            "availability": self.partitions.availability,
            "servers": list(self.servers),
            "partitions": [{"id": p, "size": s} for p, s in zip(self.partitions.ids, self.partitions.sizes)],
            "initial": [list(x) for x in self.initial.pairs()],
            "final": [list(x) for x in self.final.pairs()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        ids = tuple(str(p["id"]) for p in data["partitions"])
        sizes = tuple(float(p["size"]) for p in data["partitions"])
        parts = PartitionSet(ids, sizes, int(data["replication"]), int(data["availability"]))
        servers = tuple(data["servers"])
        return cls(
            partitions=parts,
            initial=Configuration.from_pairs(servers, ids, [tuple(x) for x in data["initial"]]),
            final=Configuration.from_pairs(servers, ids, [tuple(x) for x in data["final"]]),
            name=data.get("name", "instance"),
        )

    def dump(self, path) -> None:
        FsPath(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Instance":
        return cls.from_dict(json.loads(FsPath(path).read_text()))

    def with_availability(self, availability: int) -> "Instance":
        p = self.partitions
        return Instance(PartitionSet(p.ids, p.sizes, p.replication, availability), self.initial, self.final, self.name)


def generate_scenario(
    scenario: int,
    seed: int,
    topology: Topology,
    replication: int = 3,
    availability: int = 2,
) -> Instance:
    """Four data centers in service, then the fifth joins and placement is recomputed."""
    if scenario not in SCENARIOS:
        raise CatalogError(f"unknown scenario {scenario}; expected one of {sorted(SCENARIOS)}")
    if len(topology.datacenters) != 5:
        raise CatalogError("scenarios need the five data center preset")
    count, (lo, hi), _ = SCENARIOS[scenario]
    rng = np.random.default_rng([scenario, seed])
    sizes = tuple(float(x) for x in rng.integers(lo, hi + 1, size=count))
    width = len(str(count - 1))
    ids = tuple(f"p{j:0{width}d}" for j in range(count))
    parts = PartitionSet(ids, sizes, replication, availability)

    old = topology.restrict(topology.datacenters[:4])
    place_seed = int(rng.integers(2**31))
    before = place_as_unique_as_possible(parts, old, seed=place_seed)
    index = {s: i for i, s in enumerate(old.servers)}
    m = np.zeros((len(topology.servers), count), dtype=bool)
    for i, s in enumerate(topology.servers):
        if s in index:
            m[i] = before.matrix[index[s]]
    initial = Configuration(topology.servers, ids, m)
    after = rebalance(initial, parts, topology, seed=place_seed)
    return Instance(parts, initial, after, name=f"scenario{scenario}-seed{seed}")
