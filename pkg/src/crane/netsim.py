"""Discrete-time flow simulator for migration plans.

Time advances in one-minute steps. In every step the active transfers share
link capacity max-min fairly (progressive filling), each capped by what it
still has to send. A destination becomes a holder at the start of the step
after its transfer completes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from crane.catalog import Instance
from crane.plans import MigrationPlan, PlanError, Task, deletions_due
from crane.topology import PathTable, Topology

EPS = 1e-9
STEP = 1.0


class SourceNotHolderError(PlanError):
    def __init__(self, task: Task, sequence: int):
        super().__init__(f"sequence {sequence}: {task.source} does not hold {task.partition} ({task})")
        self.task = task
        self.sequence = sequence


def max_min_rates(
    flow_resources: Sequence[Sequence[int]],
    demands: np.ndarray,
    capacities: np.ndarray,
) -> np.ndarray:
    """Max-min fair rates by progressive filling.

    ``flow_resources[f]`` lists resource indices used by flow ``f``; a flow
    using none is limited by its demand only.
    """
    n = len(flow_resources)
    demands = np.asarray(demands, dtype=float)
    rates = np.zeros(n)
    if n == 0:
        return rates
    caps = np.asarray(capacities, dtype=float)
    inc = np.zeros((len(caps), n), dtype=bool)
    for f, res in enumerate(flow_resources):
        inc[list(res), f] = True
    free = inc.any(axis=0)
    rates[~free] = demands[~free]
    frozen = ~free | (demands <= EPS)
    residual = caps.copy()
    while not frozen.all():
        live = ~frozen
        users = inc[:, live].sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(users > 0, residual / np.maximum(users, 1), np.inf)
        step = min(share.min(), (demands[live] - rates[live]).min())
        step = max(step, 0.0)
        rates[live] += step
        residual -= step * users
        saturated = (users > 0) & (residual <= EPS * np.maximum(caps, 1.0))
        frozen |= demands - rates <= EPS * np.maximum(demands, 1.0)
        if saturated.any():
            frozen |= inc[saturated].any(axis=0)
    return rates


@dataclass
class Transfer:
    task: Task
    size: float
    remaining: float
    resources: tuple[str, ...]
    inter_dc: bool
    sequence: int
    state: str = "pending"  # pending | active | done | cancelled
    start: int | None = None
    end: int | None = None  # last step with progress
    rates: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.remaining <= self.size:
            raise ValueError("remaining must lie in [0, size]")


@dataclass
class SimState:
    clock: int
    holders: np.ndarray  # servers x partitions, complete copies right now
    loads: dict[str, float]
    active: list[Transfer]


@dataclass
class SimulationReport:
    planner: str
    servers: tuple[str, ...]
    partitions: tuple[str, ...]
    replication: int
    availability_floor: int
    total_time: int
    inter_dc_gigabits: float
    total_gigabits: float
    served: np.ndarray  # steps x partitions, replicas counted as available
    resources: tuple[str, ...]
    loads: np.ndarray  # steps x resources, allocated gigabits/min
    transfers: list[Transfer]
    promotions: dict[tuple[str, str], int]  # (server, partition) -> first step as holder
    deletions: dict[tuple[str, str], int]  # (server, partition) -> first step without it
    sequence_spans: list[tuple[int, int]]
    initial: np.ndarray  # servers x partitions

    @property
    def availability(self) -> np.ndarray:
        """Per-step per-partition availability fraction, capped at 1."""
        return np.minimum(self.served, self.replication) / self.replication

    @property
    def min_served(self) -> int:
        return int(self.served.min()) if self.served.size else self.replication

    @property
    def min_availability(self) -> float:
        return float(self.availability.min()) if self.served.size else 1.0

    def floor_violations(self) -> list[tuple[int, str]]:
        """(step, partition) samples below the availability floor."""
        steps, cols = np.nonzero(self.served < self.availability_floor)
        return [(int(t), self.partitions[j]) for t, j in zip(steps, cols)]

    def redundant_pushes(self) -> int:
        """Transfers beyond the first for the same (partition, destination)."""
        seen: dict[tuple[str, str], int] = {}
        for tr in self.transfers:
            if tr.start is None:
                continue
            key = (tr.task.partition, tr.task.destination)
            seen[key] = seen.get(key, 0) + 1
        return sum(c - 1 for c in seen.values())

    def completion_times(self) -> dict[Task, int]:
        return {tr.task: tr.end + 1 for tr in self.transfers if tr.state == "done"}

    def holder_matrix(self, step: int, physical: bool = True) -> np.ndarray:
        """Complete copies at the start of ``step``; ``physical=False`` ignores deletions."""
        z = self.initial.copy()
        s_idx = {s: i for i, s in enumerate(self.servers)}
        p_idx = {p: j for j, p in enumerate(self.partitions)}
        for (k, j), t in self.promotions.items():
            if t <= step:
                z[s_idx[k], p_idx[j]] = True
        if physical:
            for (k, j), t in self.deletions.items():
                if t <= step:
                    z[s_idx[k], p_idx[j]] = False
        return z

    # delimited exports

    def metrics_text(self) -> str:
        return (
            "total_time_min\tinter_dc_gigabits\ttotal_gigabits\tmin_availability\n"
            f"{self.total_time}\t{self.inter_dc_gigabits:.6f}\t{self.total_gigabits:.6f}\t{self.min_availability:.6f}\n"
        )

    def availability_text(self) -> str:
        """Long format: one row per (step, partition) sample."""
        lines = ["step\tpartition\tavailable_replicas\tavailability"]
        avail = self.availability
        for t in range(self.served.shape[0]):
            for j, pid in enumerate(self.partitions):
                lines.append(f"{t}\t{pid}\t{int(self.served[t, j])}\t{avail[t, j]:.6f}")
        return "\n".join(lines) + "\n"

    def loads_text(self) -> str:
        lines = ["step\t" + "\t".join(self.resources)]
        for t in range(self.loads.shape[0]):
            lines.append(f"{t}\t" + "\t".join(f"{x:.6f}" for x in self.loads[t]))
        return "\n".join(lines) + "\n"


def allocate_rates(
    state: SimState,
    topology: Topology,
    paths: PathTable | None = None,
    dt: float = STEP,
) -> dict[Task, float]:
    """Max-min rates for ``state.active``; each capped at remaining/dt."""
    caps = topology.capacities()
    names = list(caps)
    r_idx = {r: i for i, r in enumerate(names)}
    rates = max_min_rates(
        [[r_idx[r] for r in tr.resources] for tr in state.active],
        np.array([tr.remaining / dt for tr in state.active]),
        np.array([caps[r] for r in names]),
    )
    return {tr.task: float(x) for tr, x in zip(state.active, rates)}


def step(state: SimState, rates: Mapping[Task, float], s_idx, p_idx, dt: float = STEP) -> SimState:
    """Advance one step; finished transfers promote their destination for the next step."""
    if dt != STEP:
        raise ValueError("the simulator runs with a fixed one-minute step")
    holders = state.holders.copy()
    loads: dict[str, float] = {}
    still = []
    for tr in state.active:
        r = rates.get(tr.task, 0.0)
        if tr.start is None:
            tr.start = state.clock
        tr.state = "active"
        tr.rates.append(r)
        for res in tr.resources:
            loads[res] = loads.get(res, 0.0) + r
        moved = r * dt
        if tr.remaining - moved <= EPS * max(tr.size, 1.0):
            tr.remaining = 0.0
            tr.state = "done"
            tr.end = state.clock
            holders[s_idx[tr.task.destination], p_idx[tr.task.partition]] = True
        else:
            tr.remaining -= moved
            if r > 0:
                tr.end = state.clock
            still.append(tr)
    return SimState(state.clock + 1, holders, loads, still)


class _Runner:
    def __init__(self, plan: MigrationPlan, instance: Instance, topology: Topology, paths: PathTable):
        self.plan = plan
        self.instance = instance
        self.topology = topology
        self.paths = paths
        self.servers = instance.servers
        self.parts = instance.partitions
        self.s_idx = {s: i for i, s in enumerate(self.servers)}
        self.p_idx = {p: j for j, p in enumerate(self.parts.ids)}
        self.sizes = self.parts.size_map()
        caps = topology.capacities()
        self.res_names = tuple(caps)
        self.r_idx = {r: i for i, r in enumerate(self.res_names)}
        self.caps = np.array([caps[r] for r in self.res_names])
        self.holders = instance.initial.matrix.copy()
        self.target = instance.final.matrix
        self.demand = instance.demand()
        self.clock = 0
        self.served_rows: list[np.ndarray] = []
        self.load_rows: list[np.ndarray] = []
        self.transfers: list[Transfer] = []
        self.promotions: dict[tuple[str, str], int] = {}
        self.deleted: dict[tuple[str, str], int] = {}
        self.completed: dict[str, int] = {}
        self.inter_dc = 0.0
        self.total = 0.0
        self.spans: list[tuple[int, int]] = []

    def served_now(self) -> np.ndarray:
        view = self.holders & self.target if self.plan.availability == "target" else self.holders
        return view.sum(axis=0).astype(np.int32)

    def idle(self, until: int) -> None:
        zero = np.zeros(len(self.res_names))
        while self.clock < until:
            self.served_rows.append(self.served_now())
            self.load_rows.append(zero)
            self.clock += 1

    def run_sequence(self, n: int, tasks: Sequence[Task]) -> None:
        for t in tasks:
            if not self.holders[self.s_idx[t.source], self.p_idx[t.partition]]:
                raise SourceNotHolderError(t, n)
        seq = []
        for t in tasks:
            p = self.paths.path(t.source, t.destination)
            size = self.sizes[t.partition]
            seq.append(Transfer(t, size, size, p.resources, p.inter_dc, n))
        self.transfers.extend(seq)
        start = self.clock
        cancel = self.plan.duplicates == "cancel"
        while True:
            active = self._active(seq)
            if not active:
                break
            self.served_rows.append(self.served_now())
            rates = max_min_rates(
                [[self.r_idx[r] for r in tr.resources] for tr in active],
                np.array([tr.remaining / STEP for tr in active]),
                self.caps,
            )
            state = SimState(self.clock, self.holders, {}, active)
            new = step(state, dict(zip((tr.task for tr in active), rates)), self.s_idx, self.p_idx)
            row = np.zeros(len(self.res_names))
            for res, x in new.loads.items():
                row[self.r_idx[res]] = x
            self.load_rows.append(row)
            for tr, r in zip(active, rates):
                self.total += r * STEP
                if tr.inter_dc:
                    self.inter_dc += r * STEP
            for tr in active:
                if tr.state != "done":
                    continue
                key = (tr.task.destination, tr.task.partition)
                if key not in self.promotions and not self.instance.initial.matrix[self.s_idx[key[0]], self.p_idx[key[1]]]:
                    self.promotions[key] = self.clock + 1
                    self.completed[tr.task.partition] = self.completed.get(tr.task.partition, 0) + 1
                    if cancel:
                        for other in seq:
                            if other is not tr and other.state in ("pending", "active") and (
                                other.task.destination, other.task.partition
                            ) == key:
                                other.state = "cancelled"
            self.holders = new.holders
            self.clock = new.clock
        self.spans.append((start, self.clock))
        self._delete(final=False)

    def _active(self, seq: list[Transfer]) -> list[Transfer]:
        cancel = self.plan.duplicates == "cancel"
        live = []
        busy: set[str] = set()
        for tr in seq:
            if tr.state in ("done", "cancelled"):
                continue
            key = (tr.task.destination, tr.task.partition)
            if tr.state == "pending" and cancel and key in self.promotions:
                tr.state = "cancelled"
                continue
            if self.plan.serial_sources:
                if tr.task.source in busy:
                    continue
                busy.add(tr.task.source)
            live.append(tr)
        return live

    def _delete(self, final: bool) -> None:
        for k, j in deletions_due(self.demand, self.completed, self.deleted, final=final):
            self.holders[self.s_idx[k], self.p_idx[j]] = False
            self.deleted[(k, j)] = self.clock

    def run(self) -> SimulationReport:
        prev_start = None
        for n, tasks in enumerate(self.plan.sequences):
            if not tasks:
                continue
            if prev_start is not None and self.plan.cycle_minutes > 0:
                self.idle(int(math.ceil(prev_start + self.plan.cycle_minutes - EPS)))
            prev_start = self.clock
            self.run_sequence(n, tasks)
        self._delete(final=True)
        total_time = self.clock
        if not self.served_rows:
            # always keep one sample of the (unchanged) state
            self.served_rows.append(self.served_now())
            self.load_rows.append(np.zeros(len(self.res_names)))
        return SimulationReport(
            planner=self.plan.planner,
            servers=self.servers,
            partitions=self.parts.ids,
            replication=self.parts.replication,
            availability_floor=self.parts.availability,
            total_time=total_time,
            inter_dc_gigabits=self.inter_dc,
            total_gigabits=self.total,
            served=np.array(self.served_rows, dtype=np.int32),
            resources=self.res_names,
            loads=np.array(self.load_rows),
            transfers=self.transfers,
            promotions=dict(self.promotions),
            deletions=dict(self.deleted),
            sequence_spans=self.spans,
            initial=self.instance.initial.matrix.copy(),
        )


def run(plan: MigrationPlan, instance: Instance, topology: Topology, paths: PathTable) -> SimulationReport:
    """Execute ``plan`` sequence by sequence.

    A sequence starts the step after the previous one finished, or at the
    previous start plus ``plan.cycle_minutes`` if that is later. Scheduled
    deletions of a partition apply at the end of the sequence completing the
    matching creation.
    """
    return _Runner(plan, instance, topology, paths).run()


def sequence_time(
    tasks: Sequence[tuple[float, Sequence[int]]],
    capacities: np.ndarray,
) -> int:
    """Steps needed to finish ``(size, resource indices)`` transfers started together."""
    remaining = np.array([size for size, _ in tasks], dtype=float)
    resources = [list(r) for _, r in tasks]
    alive = list(range(len(tasks)))
    t = 0
    while alive:
        rates = max_min_rates([resources[f] for f in alive], remaining[alive] / STEP, capacities)
        if not (rates > 0).any():
            return math.inf
        for f, r in zip(alive, rates):
            remaining[f] -= r * STEP
        alive = [f for f in alive if remaining[f] > EPS * max(tasks[f][0], 1.0)]
        t += 1
    return t


def availability_icdf(report: SimulationReport, levels: Sequence[float] | None = None) -> list[tuple[float, float]]:
    """Fraction of (partition, step) samples whose availability is at least each level."""
    samples = report.availability.ravel()
    if samples.size == 0:
        raise ValueError("report has no availability samples")
    if levels is None:
        levels = sorted(set(np.round(samples, 9).tolist()) | {0.0, 1.0})
    return [(float(a), float(np.mean(samples >= a - 1e-12))) for a in levels]


def icdf_at(report: SimulationReport, level: float) -> float:
    return availability_icdf(report, [level])[0][1]
