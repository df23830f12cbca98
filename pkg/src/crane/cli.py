"""Experiment harness: plan, simulate and validate planner x scenario grids.

Subcommands:

  run            plan + simulate + validate; writes metrics.tsv and per-cell tables
  compare        time/traffic improvement between metrics files
  export-ilp     write the model of an instance in CPLEX LP text
  dump-instance  write a generated scenario as JSON
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from crane import __version__, netsim, planner_crane, planner_swift
from crane.catalog import CatalogError, Instance, generate_scenario
from crane.ilp import ExactLimits, LimitsExceededError, build_model, solve_exact_tiny, validate, violation_report
from crane.ilp.lpformat import export_text
from crane.ilp.model import default_horizon
from crane.plans import InfeasibleInstanceError
from crane.topology import Topology, TopologyError, build_paths, load_topology

log = logging.getLogger("crane")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INVARIANT = 0, 1, 2, 3
PLANNERS = ("crane", "swift", "exact")
ICDF_LEVEL = 0.8

METRIC_COLUMNS = (
    "scenario", "planner", "seed", "total_time_min", "inter_dc_gigabits", "total_gigabits",
    "min_availability", "icdf_080", "redundant_pushes", "eq15_violations", "violations",
    "valid", "optimality_gap", "icdf_path",
)


@dataclass
class ExperimentConfig:
    topology: str = "nsfnet-5dc"
    scenarios: list[int] = field(default_factory=lambda: [1])
    instance: str | None = None
    planner: str = "all"
    seed: int = 42
    availability: int | None = None
    cycle_minutes: float = 60.0
    full_duplication: bool = False
    out: str = "results"
    figures: bool = False
    full_traces: bool = False
    jobs: int = 1

    def check(self) -> None:
        if self.planner not in (*PLANNERS, "all"):
            raise ValueError(f"unknown planner {self.planner!r}")
        if self.instance is not None and not Path(self.instance).exists():
            raise FileNotFoundError(f"instance file not found: {self.instance}")
        if self.cycle_minutes <= 0:
            raise ValueError("cycle minutes must be positive")
        if self.availability is not None and self.availability < 1:
            raise ValueError("availability floor must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def merge_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file values first, then any flag given on the command line."""
    cfg = ExperimentConfig()
    if args.config:
        data = json.loads(Path(args.config).read_text())
        unknown = set(data) - set(asdict(cfg))
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            setattr(cfg, k, v)
    for k in asdict(cfg):
        flag = getattr(args, k, None)
        if flag is None or flag is False:
            continue
        if args.config and k in data and data[k] != flag:
            log.info("flag --%s=%r overrides config value %r", k.replace("_", "-"), flag, data[k])
        setattr(cfg, k, flag)
    cfg.scenarios = [int(s) for s in cfg.scenarios]
    cfg.check()
    return cfg


# grid cells


@dataclass(frozen=True)
class Cell:
    label: str  # scenario column
    planner: str


def _instance_for(cfg: ExperimentConfig, topology: Topology, label: str) -> Instance:
    if cfg.instance is not None:
        inst = Instance.load(cfg.instance)
    else:
        inst = generate_scenario(int(label), cfg.seed, topology)
    if cfg.availability is not None:
        if cfg.availability > inst.partitions.replication:
            raise ValueError(
                f"availability floor {cfg.availability} exceeds replication factor {inst.partitions.replication}"
            )
        inst = inst.with_availability(cfg.availability)
    return inst


def _plan(cfg, planner, inst, topology, paths):
    if planner == "crane":
        return planner_crane.plan_instance(inst, topology, paths)
    if planner == "swift":
        params = planner_swift.SwiftParams(cycle_minutes=cfg.cycle_minutes, full_duplication=cfg.full_duplication)
        return planner_swift.plan_instance(inst, topology, paths, params)
    return solve_exact_tiny(inst, topology, paths)[0]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def run_cell(cfg: ExperimentConfig, cell: Cell) -> dict:
    """Plan, simulate and validate one (scenario, planner) pair; returns the
    metrics row and the text of every per-cell file."""
    topology = load_topology(cfg.topology)
    paths = build_paths(topology)
    inst = _instance_for(cfg, topology, cell.label)
    plan = _plan(cfg, cell.planner, inst, topology, paths)
    report = netsim.run(plan, inst, topology, paths)
    horizon = max(default_horizon(inst, topology), report.total_time, 1)
    violations = validate(report, build_model(inst, topology, paths, T=horizon))
    stem = f"{cell.label}-{cell.planner}"
    icdf = netsim.availability_icdf(report)
    files = {
        f"{stem}.plan.tsv": plan.to_text(),
        f"{stem}.icdf.tsv": "level\tprobability\n" + "".join(f"{_fmt(a)}\t{_fmt(p)}\n" for a, p in icdf),
        f"{stem}.availability.tsv": _availability_summary(report),
        f"{stem}.violations.tsv": "family\tlabel\n" + violation_report(violations),
    }
    if cfg.full_traces:
        files[f"{stem}.availability_full.tsv"] = report.availability_text()
        files[f"{stem}.loads.tsv"] = report.loads_text()
    row = {
        "scenario": cell.label,
        "planner": cell.planner,
        "seed": str(cfg.seed) if cfg.instance is None else "",
        "total_time_min": str(report.total_time),
        "inter_dc_gigabits": _fmt(report.inter_dc_gigabits),
        "total_gigabits": _fmt(report.total_gigabits),
        "min_availability": _fmt(report.min_availability),
        "icdf_080": _fmt(netsim.icdf_at(report, ICDF_LEVEL)),
        "redundant_pushes": str(report.redundant_pushes()),
        "eq15_violations": str(sum(v.family == "eq15" for v in violations)),
        "violations": str(len(violations)),
        "valid": "pass" if not violations else "fail",
        "optimality_gap": "",
        "icdf_path": f"{stem}.icdf.tsv",
    }
    return {"row": row, "files": files, "curve": icdf}


def _availability_summary(report) -> str:
    avail = report.availability
    below = (report.served < report.availability_floor).sum(axis=1)
    lines = ["step\tmin_availability\tmean_availability\tpartitions_below_floor"]
    for t in range(avail.shape[0]):
        lines.append(f"{t}\t{_fmt(avail[t].min())}\t{_fmt(avail[t].mean())}\t{int(below[t])}")
    return "\n".join(lines) + "\n"


def _cells(cfg: ExperimentConfig) -> list[Cell]:
    labels = [Path(cfg.instance).stem] if cfg.instance else [str(s) for s in cfg.scenarios]
    if cfg.planner == "all":
        planners = ["crane", "swift", "exact"]
    elif cfg.planner == "exact":
        planners = ["crane", "exact"]
    else:
        planners = [cfg.planner]
    return [Cell(label, p) for label in labels for p in planners]


def _exact_fits(cfg: ExperimentConfig, label: str) -> bool:
    topology = load_topology(cfg.topology)
    inst = _instance_for(cfg, topology, label)
    lim = ExactLimits()
    return (
        len(inst.servers) <= lim.servers
        and len(inst.partitions) <= lim.partitions
        and len(inst.demand().creations) <= lim.creations
    )


def run_experiment(cfg: ExperimentConfig) -> int:
    cells = _cells(cfg)
    if cfg.planner == "all":
        fits = {c.label: None for c in cells}
        for label in fits:
            fits[label] = _exact_fits(cfg, label)
            if not fits[label]:
                log.info("scenario %s: too large for the exact solver, skipping it", label)
        cells = [c for c in cells if c.planner != "exact" or fits[c.label]]
    if cfg.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(run_cell, [cfg] * len(cells), cells))
    else:
        results = [run_cell(cfg, c) for c in cells]

    # merge in grid order, single-threaded
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r["row"] for r in results]
    exact = {r["scenario"]: int(r["total_time_min"]) for r in rows if r["planner"] == "exact"}
    for r in rows:
        if r["planner"] == "crane" and r["scenario"] in exact:
            opt = exact[r["scenario"]]
            gap = (int(r["total_time_min"]) - opt) / opt if opt else 0.0
            r["optimality_gap"] = _fmt(gap)
    written = {}
    for res in results:
        for name, text in res["files"].items():
            written[name] = text
    written["metrics.tsv"] = _tsv(rows, METRIC_COLUMNS)
    for name, text in sorted(written.items()):
        (out / name).write_text(text)
    if cfg.figures:
        from crane import plotting

        curves = {(r["row"]["scenario"], r["row"]["planner"]): r["curve"] for r in results}
        for p in plotting.render(rows, curves, out):
            written[str(p.relative_to(out))] = p.read_bytes()
    manifest = {
        "version": __version__,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "cells": [asdict(c) for c in cells],
        "files": {
            name: hashlib.sha256(text if isinstance(text, bytes) else text.encode()).hexdigest()
            for name, text in sorted(written.items())
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    sys.stdout.write(written["metrics.tsv"])

    broken = [r for r in rows if r["planner"] in ("crane", "exact") and r["valid"] != "pass"]
    if broken:
        for r in broken:
            log.error("%s run on scenario %s violates %s constraints (see %s-%s.violations.tsv)",
                      r["planner"], r["scenario"], r["violations"], r["scenario"], r["planner"])
        return EXIT_INVARIANT
    return EXIT_OK


def _tsv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), delimiter="\t", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _read_tsv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


# compare

COMPARE_COLUMNS = (
    "scenario", "baseline", "candidate", "time_improvement_pct", "traffic_improvement_pct",
    "icdf_080_baseline", "icdf_080_candidate",
)


class ScenarioMismatchError(ValueError):
    pass


def _pct(base: float, cand: float) -> float:
    return 100.0 * (base - cand) / base if base else 0.0


def compare(paths: list[str]) -> str:
    """Compare every file against the first, scenario by scenario.

    A file holding one planner per scenario is matched on scenario alone
    (the usual Swift-file vs CRANE-file case). When both files hold several
    planners, rows are also matched by planner.
    """
    if len(paths) < 2:
        raise ValueError("compare needs at least two metrics files")
    tables = [_read_tsv(p) for p in paths]
    scen_sets = [sorted({r["scenario"] for r in t}) for t in tables]
    if any(s != scen_sets[0] for s in scen_sets[1:]):
        raise ScenarioMismatchError(f"metrics files cover different scenarios: {scen_sets}")
    base_rows = tables[0]
    out = []
    for path, table in zip(paths[1:], tables[1:]):
        for scen in scen_sets[0]:
            b = [r for r in base_rows if r["scenario"] == scen]
            c = [r for r in table if r["scenario"] == scen]
            if len(b) == 1 or len(c) == 1:
                pairs = [(x, y) for x in b for y in c]
            else:
                pairs = [(x, y) for x in b for y in c if x["planner"] == y["planner"]]
                if not pairs:
                    raise ScenarioMismatchError(f"scenario {scen}: no planner in common between {paths[0]} and {path}")
            for x, y in pairs:
                out.append({
                    "scenario": scen,
                    "baseline": x["planner"],
                    "candidate": y["planner"],
                    "time_improvement_pct": f"{_pct(float(x['total_time_min']), float(y['total_time_min'])):.2f}",
                    "traffic_improvement_pct": f"{_pct(float(x['inter_dc_gigabits']), float(y['inter_dc_gigabits'])):.2f}",
                    "icdf_080_baseline": x["icdf_080"],
                    "icdf_080_candidate": y["icdf_080"],
                })
    return _tsv(out, COMPARE_COLUMNS)


# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crane-mig", description="Replica migration planning and simulation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="plan, simulate and validate")
    run.add_argument("--config", help="JSON file with run settings; flags win over it")
    run.add_argument("--topology", help="preset (nsfnet, nsfnet-5dc) or topology JSON file")
    run.add_argument("--scenario", dest="scenarios", type=int, nargs="+", choices=[1, 2, 3, 4])
    run.add_argument("--instance", help="instance JSON file instead of a generated scenario")
    run.add_argument("--planner", choices=[*PLANNERS, "all"])
    run.add_argument("--seed", type=int)
    run.add_argument("--availability", type=int, help="override the availability floor A")
    run.add_argument("--cycle-minutes", type=float)
    run.add_argument("--full-duplication", action="store_true", default=None,
                     help="Swift duplicate pushes run to completion")
    run.add_argument("--out")
    run.add_argument("--figures", action="store_true", default=None, help="also render PNG figures")
    run.add_argument("--full-traces", action="store_true", default=None,
                     help="also write per-sample availability and link loads")
    run.add_argument("--jobs", type=int, help="grid cells run in parallel")

    cmp_ = sub.add_parser("compare", help="improvement of later metrics files over the first")
    cmp_.add_argument("files", nargs="+")

    ex = sub.add_parser("export-ilp", help="write the model as CPLEX LP text")
    ex.add_argument("--topology", default="nsfnet-5dc")
    ex.add_argument("--instance", required=True)
    ex.add_argument("--horizon", type=int)
    ex.add_argument("--beta", type=float)
    ex.add_argument("--out", required=True)

    dump = sub.add_parser("dump-instance", help="write a generated scenario as JSON")
    dump.add_argument("--topology", default="nsfnet-5dc")
    dump.add_argument("--scenario", type=int, required=True, choices=[1, 2, 3, 4])
    dump.add_argument("--seed", type=int, default=42)
    dump.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return run_experiment(merge_config(args))
        if args.command == "compare":
            sys.stdout.write(compare(args.files))
            return EXIT_OK
        if args.command == "export-ilp":
            topology = load_topology(args.topology)
            model = build_model(Instance.load(args.instance), topology, build_paths(topology), args.horizon, args.beta)
            Path(args.out).write_text(export_text(model))
            return EXIT_OK
        if args.command == "dump-instance":
            generate_scenario(args.scenario, args.seed, load_topology(args.topology)).dump(args.out)
            return EXIT_OK
    except (InfeasibleInstanceError, CatalogError) as exc:
        log.error("infeasible instance: %s", exc)
        return EXIT_INFEASIBLE
    except (LimitsExceededError, ScenarioMismatchError, TopologyError, ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
