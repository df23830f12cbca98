"""Swift-style baseline: uncoordinated push replication in hourly rebalance rounds."""

from __future__ import annotations

from dataclasses import dataclass

from crane.catalog import Instance, MigrationDemand, PartitionSet
from crane.plans import InfeasibleInstanceError, MigrationPlan, Task, deletions_due
from crane.topology import PathTable, Topology


@dataclass(frozen=True)
class SwiftParams:
    cycle_minutes: float = 60.0
    # order in which a server walks its partitions when pushing
    scan_order: str = "ascending"
    # keep pushing duplicates after the first copy lands
    full_duplication: bool = False

    def __post_init__(self):
        if not self.cycle_minutes > 0:
            raise ValueError("cycle_minutes must be positive")
        if self.scan_order not in ("ascending", "descending"):
            raise ValueError(f"unknown scan order {self.scan_order!r}")


def plan_swift(
    demand: MigrationDemand,
    initial,
    partitions: PartitionSet,
    topology: Topology,
    paths: PathTable,
    params: SwiftParams = SwiftParams(),
) -> MigrationPlan:
    """One round per rebalance cycle.

    In a round each pending partition moves one replica (the lowest pending
    destination): every server holding the partition pushes it there, with
    no coordination between them. Servers work through their pushes one at a
    time in partition scan order. Read traffic follows the target placement
    from the first rebalance on, so copies scheduled for removal stop counting
    towards availability even while they still push data.
    """
    servers = initial.servers
    s_idx = {s: i for i, s in enumerate(servers)}
    p_idx = {p: j for j, p in enumerate(initial.partitions)}
    holders = initial.matrix.copy()
    pending: dict[str, list[str]] = {}
    for k, j in sorted(demand.creations):
        pending.setdefault(j, []).append(k)
    for j in pending:
        if not holders[:, p_idx[j]].any():
            raise InfeasibleInstanceError(f"partition {j!r} has no replica to copy from")

    reverse = params.scan_order == "descending"
    rounds: list[tuple[Task, ...]] = []
    completed: dict[str, int] = {}
    applied: set[tuple[str, str]] = set()
    while pending:
        by_source: dict[str, list[Task]] = {}
        moves = []
        for j in sorted(pending):
            k = pending[j][0]
            moves.append((j, k))
            for i, s in enumerate(servers):
                if holders[i, p_idx[j]]:
                    by_source.setdefault(s, []).append(Task(s, j, k))
        tasks = []
        for s in servers:
            tasks.extend(sorted(by_source.get(s, []), key=lambda t: t.partition, reverse=reverse))
        rounds.append(tuple(tasks))
        for j, k in moves:
            holders[s_idx[k], p_idx[j]] = True
            completed[j] = completed.get(j, 0) + 1
            pending[j].remove(k)
            if not pending[j]:
                del pending[j]
        for k, j in deletions_due(demand, completed, applied):
            holders[s_idx[k], p_idx[j]] = False
            applied.add((k, j))
    return MigrationPlan(
        "swift",
        tuple(rounds),
        cycle_minutes=params.cycle_minutes,
        serial_sources=True,
        duplicates="full" if params.full_duplication else "cancel",
        availability="target",
        meta={"scan_order": params.scan_order},
    )


def plan_instance(instance: Instance, topology: Topology, paths: PathTable, params: SwiftParams = SwiftParams()):
    return plan_swift(instance.demand(), instance.initial, instance.partitions, topology, paths, params)
