"""Migration plans: ordered sequences of (source, partition, destination) tasks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath
from typing import Iterable, Mapping

from crane.catalog import MigrationDemand


class PlanError(ValueError):
    pass


class InfeasibleInstanceError(PlanError):
    """A creation cannot be sourced, or the availability floor is broken from the start."""


@dataclass(frozen=True, order=True)
class Task:
    source: str
    partition: str
    destination: str


@dataclass(frozen=True)
class MigrationPlan:
    planner: str
    sequences: tuple[tuple[Task, ...], ...] = ()
    # minimum start-to-start spacing of sequences (Swift's rebalance cycle)
    cycle_minutes: float = 0.0
    # each source pushes one task at a time, in sequence order
    serial_sources: bool = False
    # "cancel": duplicate pushes stop once one copy completes; "full": they run to the end
    duplicates: str = "cancel"
    # "holders": every complete copy serves reads; "target": only copies in the final placement do
    availability: str = "holders"
    meta: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.duplicates not in ("cancel", "full"):
            raise PlanError(f"unknown duplicate policy {self.duplicates!r}")
        if self.availability not in ("holders", "target"):
            raise PlanError(f"unknown availability view {self.availability!r}")
        if self.cycle_minutes < 0:
            raise PlanError("cycle_minutes must be >= 0")

    def __len__(self):
        return len(self.sequences)

    def tasks(self) -> list[Task]:
        return [t for seq in self.sequences for t in seq]

    def creations(self) -> set[tuple[str, str]]:
        return {(t.destination, t.partition) for t in self.tasks()}

    def with_(self, **kw) -> "MigrationPlan":
        return replace(self, **kw)

    # text format

    def to_text(self) -> str:
        lines = [
            f"# planner\t{self.planner}",
            f"# cycle_minutes\t{self.cycle_minutes:g}",
            f"# serial_sources\t{int(self.serial_sources)}",
            f"# duplicates\t{self.duplicates}",
            f"# availability\t{self.availability}",
        ]
        lines += [f"# {k}\t{v}" for k, v in sorted(self.meta.items())]
        lines.append("sequence\tsource\tpartition\tdestination")
        for n, seq in enumerate(self.sequences):
            for t in seq:
                lines.append(f"{n}\t{t.source}\t{t.partition}\t{t.destination}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MigrationPlan":
        header: dict[str, str] = {}
        rows: list[tuple[int, Task]] = []
        seen_columns = False
        for raw in text.splitlines():
            if not raw.strip():
                continue
            if raw.startswith("#"):
                key, _, value = raw[1:].strip().partition("\t")
                header[key] = value
                continue
            if not seen_columns:
                if raw.split("\t") != ["sequence", "source", "partition", "destination"]:
                    raise PlanError(f"unexpected plan header: {raw!r}")
                seen_columns = True
                continue
            parts = raw.split("\t")
            if len(parts) != 4:
                raise PlanError(f"malformed plan line: {raw!r}")
            rows.append((int(parts[0]), Task(parts[1], parts[2], parts[3])))
        count = max((n for n, _ in rows), default=-1) + 1
        seqs: list[list[Task]] = [[] for _ in range(count)]
        for n, t in rows:
            seqs[n].append(t)
        known = {"planner", "cycle_minutes", "serial_sources", "duplicates", "availability"}
        return cls(
            planner=header.get("planner", "unknown"),
            sequences=tuple(tuple(s) for s in seqs),
            cycle_minutes=float(header.get("cycle_minutes", 0)),
            serial_sources=header.get("serial_sources", "0") == "1",
            duplicates=header.get("duplicates", "cancel"),
            availability=header.get("availability", "holders"),
            meta={k: v for k, v in header.items() if k not in known},
        )

    def dump(self, path) -> None:
        FsPath(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "MigrationPlan":
        return cls.from_text(FsPath(path).read_text())


def deletions_due(
    demand: MigrationDemand,
    completed: Mapping[str, int],
    applied: Iterable[tuple[str, str]],
    final: bool = False,
) -> list[tuple[str, str]]:
    """Deletions to apply at a sequence boundary.

    A partition loses one scheduled replica per creation of it completed so
    far; at the end of the plan (``final``) all remaining deletions apply.
    Planners and the simulator share this rule so they agree on who holds
    what when a sequence starts.
    """
    applied = set(applied)
    out = []
    by_partition: dict[str, list[str]] = {}
    for k, j in sorted(demand.deletions):
        by_partition.setdefault(j, []).append(k)
    for j in sorted(by_partition):
        servers = by_partition[j]
        done = sum(1 for k in servers if (k, j) in applied)
        allowed = len(servers) if final else min(len(servers), completed.get(j, 0))
        for k in servers:
            if done >= allowed:
                break
            if (k, j) not in applied:
                out.append((k, j))
                done += 1
    return out
