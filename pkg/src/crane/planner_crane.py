"""Greedy sequence construction with best-source selection and an availability gate."""

from __future__ import annotations

import logging
from typing import Iterable, Mapping, Sequence

import numpy as np

from crane.catalog import Instance, MigrationDemand, PartitionSet
from crane.netsim import sequence_time
from crane.plans import InfeasibleInstanceError, MigrationPlan, Task, deletions_due
from crane.topology import PathTable, Topology

log = logging.getLogger(__name__)

# Above this many pending creations the dry-run estimator becomes quadratic in
# simulations; the volume estimator takes over.
DRYRUN_LIMIT = 64


def admissible(partition: str, sequence: Iterable[Task], holders: int, availability: int) -> bool:
    """Can one more copy of ``partition`` join the sequence?

    Deletions wait for the end of the sequence, so an in-flight copy never
    removes a serving replica: the gate is one task per partition per
    sequence, and the partition must be at or above the floor.
    """
    if any(t.partition == partition for t in sequence):
        return False
    return holders >= availability


def estimate_time(
    sequence: Sequence[Task],
    candidate: Task,
    topology: Topology,
    paths: PathTable,
    sizes: Mapping[str, float],
) -> int:
    """Minutes for ``sequence + candidate`` to finish when started together."""
    caps = topology.capacities()
    names = list(caps)
    r_idx = {r: i for i, r in enumerate(names)}
    tasks = [
        (sizes[t.partition], [r_idx[r] for r in paths.path(t.source, t.destination).resources])
        for t in (*sequence, candidate)
    ]
    return sequence_time(tasks, np.array([caps[r] for r in names]))


def load_bound(sequence: Sequence[Task], candidate: Task, topology: Topology, paths: PathTable, sizes) -> float:
    """Fractional minutes the busiest resource needs for ``sequence + candidate``."""
    caps = topology.capacities()
    volume: dict[str, float] = {}
    for t in (*sequence, candidate):
        for r in paths.path(t.source, t.destination).resources:
            volume[r] = volume.get(r, 0.0) + sizes[t.partition]
    return max((v / caps[r] for r, v in volume.items()), default=0.0)


class _VolumeModel:
    """Load-based completion estimate: the slowest resource drains its queued
    volume at full capacity. Incremental, so a whole sequence costs one pass."""

    def __init__(self, topology: Topology, paths: PathTable):
        caps = topology.capacities()
        self.names = list(caps)
        self.r_idx = {r: i for i, r in enumerate(self.names)}
        self.caps = np.array([caps[r] for r in self.names] + [np.inf])
        self.paths = paths
        self.reset()

    def reset(self):
        self.volume = np.zeros(len(self.caps))
        self.current = 0.0

    def resources(self, t: Task) -> list[int]:
        return [self.r_idx[r] for r in self.paths.path(t.source, t.destination).resources]

    def score(self, res_matrix: np.ndarray, sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        own = ((self.volume[res_matrix] + sizes[:, None]) / self.caps[res_matrix]).max(axis=1)
        return np.maximum(self.current, np.ceil(own - 1e-9)), own

    def add(self, res: list[int], size: float):
        for r in res:
            self.volume[r] += size
        own = max((self.volume[r] / self.caps[r] for r in res), default=0.0)
        self.current = max(self.current, float(np.ceil(own - 1e-9)))


def plan(
    demand: MigrationDemand,
    initial,
    partitions: PartitionSet,
    topology: Topology,
    paths: PathTable,
    estimator: str = "auto",
) -> MigrationPlan:
    """Build CRANE sequences.

    Each round of the inner loop scans every pending partition that passes
    the gate, finds its fastest source for the current sequence, and commits
    the overall fastest (ties: lower partition id, then lower source id).
    A partition needing several new replicas comes back in later sequences,
    one creation per sequence. Completed copies serve as sources from the
    next sequence on.

    ``estimator`` is "dryrun" (simulate the sequence with the candidate),
    "volume" (incremental load bound), or "auto" (dry-run for small demands).
    """
    if estimator == "auto":
        estimator = "dryrun" if len(demand.creations) <= DRYRUN_LIMIT else "volume"
    if estimator not in ("dryrun", "volume"):
        raise ValueError(f"unknown estimator {estimator!r}")

    servers = initial.servers
    s_idx = {s: i for i, s in enumerate(servers)}
    p_idx = {p: j for j, p in enumerate(initial.partitions)}
    holders = initial.matrix.copy()
    sizes = partitions.size_map()
    floor = partitions.availability

    pending: dict[str, list[str]] = {}
    for k, j in sorted(demand.creations):
        pending.setdefault(j, []).append(k)
    for j in pending:
        pending[j].sort()
        if not holders[:, p_idx[j]].any():
            raise InfeasibleInstanceError(f"partition {j!r} has no replica to copy from")

    model = _VolumeModel(topology, paths) if estimator == "volume" else None
    sequences: list[tuple[Task, ...]] = []
    completed: dict[str, int] = {}
    applied: set[tuple[str, str]] = set()

    while pending:
        cands = []
        for j in sorted(pending):
            if not admissible(j, (), int(holders[:, p_idx[j]].sum()), floor):
                continue
            k = pending[j][0]
            for i in np.flatnonzero(holders[:, p_idx[j]]):
                cands.append(Task(servers[i], j, k))
        if model is not None:
            seq = _fill_volume(model, cands, sizes)
        else:
            seq = _fill_dryrun(cands, topology, paths, sizes)
        if not seq:
            raise InfeasibleInstanceError(
                "no pending creation can be scheduled without breaking the availability floor: "
                + ", ".join(sorted(pending)[:5])
            )
        sequences.append(tuple(seq))
        for t in seq:
            holders[s_idx[t.destination], p_idx[t.partition]] = True
            completed[t.partition] = completed.get(t.partition, 0) + 1
            pending[t.partition].remove(t.destination)
            if not pending[t.partition]:
                del pending[t.partition]
        for k, j in deletions_due(demand, completed, applied):
            holders[s_idx[k], p_idx[j]] = False
            applied.add((k, j))
    log.debug("crane: %d sequences, %d tasks", len(sequences), sum(map(len, sequences)))
    return MigrationPlan("crane", tuple(sequences), meta={"estimator": estimator})


def _fill_dryrun(cands: list[Task], topology, paths, sizes) -> list[Task]:
    seq = _greedy_dryrun(cands, topology, paths, sizes)
    return _reselect_sources(seq, cands, topology, paths, sizes)


def _reselect_sources(seq: list[Task], cands: list[Task], topology, paths, sizes) -> list[Task]:
    """Revisit each task's source against the finished sequence; keep strict improvements."""

    def key(s):
        rest = s[:-1]
        return estimate_time(rest, s[-1], topology, paths, sizes), load_bound(rest, s[-1], topology, paths, sizes)

    if len(seq) < 2:
        return seq
    alternatives = {}
    for c in cands:
        alternatives.setdefault(c.partition, []).append(c)
    best_key = key(seq)
    improved = True
    while improved:
        improved = False
        for n, task in enumerate(seq):
            for alt in alternatives[task.partition]:
                if alt == task:
                    continue
                trial = seq[:n] + [alt] + seq[n + 1 :]
                k = key(trial)
                if k < best_key:
                    seq, best_key, improved = trial, k, True
                    task = alt
    return seq


def _greedy_dryrun(cands: list[Task], topology, paths, sizes) -> list[Task]:
    seq: list[Task] = []
    left = list(cands)
    while left:
        # equal estimates fall back to the lighter load bound, then to scan
        # order (partition id, source); strict < keeps the first
        best, best_t = None, None
        for c in left:
            t = (estimate_time(seq, c, topology, paths, sizes), load_bound(seq, c, topology, paths, sizes))
            if best_t is None or t < best_t:
                best, best_t = c, t
        seq.append(best)
        left = [c for c in left if c.partition != best.partition]
    return seq


def _fill_volume(model: _VolumeModel, cands: list[Task], sizes) -> list[Task]:
    model.reset()
    if not cands:
        return []
    res = [model.resources(c) for c in cands]
    width = max(1, max(len(r) for r in res))
    pad = len(model.caps) - 1
    mat = np.full((len(cands), width), pad, dtype=int)
    for n, r in enumerate(res):
        mat[n, : len(r)] = r
    size_arr = np.array([sizes[c.partition] for c in cands])
    part = np.array([c.partition for c in cands])
    alive = np.ones(len(cands), dtype=bool)
    rank = np.arange(len(cands))
    seq = []
    while alive.any():
        idx = np.flatnonzero(alive)
        est, own = model.score(mat[idx], size_arr[idx])
        # estimate, then own drain time, then scan order (partition id, source)
        n = idx[np.lexsort((rank[idx], own, est))[0]]
        seq.append(cands[n])
        model.add(res[n], size_arr[n])
        alive &= part != part[n]
    return seq


def plan_instance(instance: Instance, topology: Topology, paths: PathTable, **kw) -> MigrationPlan:
    instance.check()
    return plan(instance.demand(), instance.initial, instance.partitions, topology, paths, **kw)
