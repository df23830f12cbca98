"""Exhaustive optimum for tiny instances, used as a reference for the heuristics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

from crane import netsim
from crane.catalog import Instance
from crane.plans import InfeasibleInstanceError, MigrationPlan, Task, deletions_due
from crane.topology import PathTable, Topology


class LimitsExceededError(ValueError):
    pass


@dataclass(frozen=True)
class ExactLimits:
    servers: int = 4
    partitions: int = 3
    creations: int = 4


def _ordered_partitions(items: list) -> Iterator[list[list]]:
    """Every split of ``items`` into a sequence of non-empty blocks."""
    n = len(items)
    for blocks in range(1, n + 1):
        for labels in itertools.product(range(blocks), repeat=n):
            if len(set(labels)) != blocks:
                continue
            out = [[] for _ in range(blocks)]
            for item, b in zip(items, labels):
                out[b].append(item)
            yield out


def _check_limits(instance: Instance, limits: ExactLimits) -> None:
    n_cre = len(instance.demand().creations)
    if (
        len(instance.servers) > limits.servers
        or len(instance.partitions) > limits.partitions
        or n_cre > limits.creations
    ):
        raise LimitsExceededError(
            f"instance too large for exhaustive search ({len(instance.servers)} servers, "
            f"{len(instance.partitions)} partitions, {n_cre} creations; limits "
            f"{limits.servers}/{limits.partitions}/{limits.creations}); use the crane planner instead"
        )


def enumerate_plans(instance: Instance) -> Iterator[MigrationPlan]:
    """All gate-respecting plans: every ordered grouping of the creations into
    sequences (one creation per partition per sequence, partition at or above
    the floor when its sequence starts) and every choice of source among the
    holders at that point."""
    demand = instance.demand()
    creations = sorted((j, k) for k, j in demand.creations)
    servers = instance.servers
    p_idx = {p: j for j, p in enumerate(instance.partitions.ids)}
    s_idx = {s: i for i, s in enumerate(servers)}
    floor = instance.partitions.availability
    if not creations:
        yield MigrationPlan("exact", ())
        return
    for blocks in _ordered_partitions(creations):
        if any(len({j for j, _ in b}) != len(b) for b in blocks):
            continue
        yield from _source_choices(blocks, 0, instance.initial.matrix.copy(), {}, set(), (), demand, servers, s_idx, p_idx, floor)


def _source_choices(blocks, n, holders, completed, applied, done, demand, servers, s_idx, p_idx, floor):
    if n == len(blocks):
        yield MigrationPlan("exact", done)
        return
    block = sorted(blocks[n])
    options = []
    for j, k in block:
        col = holders[:, p_idx[j]]
        if col.sum() < floor or not col.any():
            return
        options.append([Task(servers[i], j, k) for i in range(len(servers)) if col[i]])
    nxt = holders.copy()
    comp = dict(completed)
    for j, k in block:
        nxt[s_idx[k], p_idx[j]] = True
        comp[j] = comp.get(j, 0) + 1
    app = set(applied)
    for k, j in deletions_due(demand, comp, app):
        nxt[s_idx[k], p_idx[j]] = False
        app.add((k, j))
    for choice in itertools.product(*options):
        yield from _source_choices(blocks, n + 1, nxt, comp, app, done + (tuple(choice),), demand, servers, s_idx, p_idx, floor)


def _encoding(plan: MigrationPlan):
    return tuple(tuple((t.partition, t.destination, t.source) for t in seq) for seq in plan.sequences)


def solve_exact_tiny(
    instance: Instance,
    topology: Topology,
    paths: PathTable,
    limits: ExactLimits = ExactLimits(),
    record: list | None = None,
) -> tuple[MigrationPlan, int]:
    """Minimum simulated total time over :func:`enumerate_plans`.

    Ties go to the lexicographically smallest plan encoding. If ``record`` is
    given, every (plan, time) pair evaluated is appended to it.
    """
    _check_limits(instance, limits)
    instance.check()
    best = None
    for plan in enumerate_plans(instance):
        t = netsim.run(plan, instance, topology, paths).total_time
        if record is not None:
            record.append((plan, t))
        key = (t, _encoding(plan))
        if best is None or key < best[0]:
            best = (key, plan)
    if best is None:
        raise InfeasibleInstanceError("no sequence order keeps every partition at the availability floor")
    return best[1], best[0][0]
