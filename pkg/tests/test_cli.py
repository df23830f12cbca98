import csv
import hashlib
import json
import logging
from pathlib import Path

import pytest

from crane import cli
from crane.fixtures import asymmetric_sources, walkthrough_instance, walkthrough_topology

from conftest import make_instance


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


@pytest.fixture
def asym_files(tmp_path):
    topo, inst = asymmetric_sources()
    topo.dump(tmp_path / "topo.json")
    inst.dump(tmp_path / "asym.json")
    return tmp_path / "topo.json", tmp_path / "asym.json"


def test_exact_adds_gap_for_crane(tmp_path, asym_files, capsys):
    topo, inst = asym_files
    out = tmp_path / "out"
    code = cli.main(["run", "--topology", str(topo), "--instance", str(inst), "--planner", "exact", "--out", str(out)])
    assert code == 0
    rows = {r["planner"]: r for r in _rows(out / "metrics.tsv")}
    assert set(rows) == {"crane", "exact"}
    assert rows["crane"]["optimality_gap"] == "0.000000"
    assert rows["exact"]["valid"] == "pass"
    assert "total_time_min" in capsys.readouterr().out


def test_noop_instance_all_zero(tmp_path, asym_files):
    topo, _ = asym_files
    inst = make_instance(("s1", "s2", "s3"), {"p": 1.0}, [("s1", "p")], [("s1", "p")])
    inst.dump(tmp_path / "noop.json")
    out = tmp_path / "o"
    assert cli.main(["run", "--topology", str(topo), "--instance", str(tmp_path / "noop.json"), "--out", str(out)]) == 0
    rows = _rows(out / "metrics.tsv")
    assert {r["planner"] for r in rows} == {"crane", "swift", "exact"}
    assert all(r["total_time_min"] == "0" for r in rows)


def test_walkthrough_run_files(tmp_path):
    walkthrough_topology().dump(tmp_path / "t.json")
    walkthrough_instance().dump(tmp_path / "wt.json")
    out = tmp_path / "o"
    args = ["run", "--topology", str(tmp_path / "t.json"), "--instance", str(tmp_path / "wt.json"), "--out", str(out)]
    assert cli.main(args + ["--figures"]) == 0
    rows = {r["planner"]: r for r in _rows(out / "metrics.tsv")}
    assert set(rows) == {"crane", "swift"}  # six servers: beyond the exact solver
    assert rows["crane"]["valid"] == "pass" and rows["swift"]["eq15_violations"] != "0"
    assert int(rows["crane"]["total_time_min"]) < int(rows["swift"]["total_time_min"])
    for name in ("wt-crane.plan.tsv", "wt-swift.icdf.tsv", "wt-swift.violations.tsv", "manifest.json",
                 "figures/migration_time.png", "figures/availability_icdf.png"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["instance"].endswith("wt.json") and "version" in manifest
    digest = hashlib.sha256((out / "metrics.tsv").read_bytes()).hexdigest()
    assert manifest["files"]["metrics.tsv"] == digest


def test_rerun_is_byte_identical(tmp_path):
    walkthrough_topology().dump(tmp_path / "t.json")
    walkthrough_instance().dump(tmp_path / "wt.json")
    out = tmp_path / "o"
    args = ["run", "--topology", str(tmp_path / "t.json"), "--instance", str(tmp_path / "wt.json"),
            "--out", str(out), "--figures", "--full-traces"]

    def snapshot():
        return {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}

    cli.main(args)
    first = snapshot()
    for p in out.rglob("*.tsv"):
        p.unlink()
    cli.main(args)
    assert snapshot() == first
    # parallel cells: same tables, only the config echo differs
    cli.main(args + ["--jobs", "2"])
    parallel = snapshot()
    manifest = parallel.pop(Path("manifest.json"))
    first.pop(Path("manifest.json"))
    assert parallel == first and b'"jobs": 2' in manifest


def test_infeasible_exit_code(tmp_path, asym_files):
    topo, _ = asym_files
    bad = make_instance(("s1", "s2", "s3"), {"p": 1.0}, [("s1", "p")], [("s1", "p"), ("s2", "p")], R=2, A=2)
    bad.dump(tmp_path / "bad.json")
    code = cli.main(["run", "--topology", str(topo), "--instance", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_INFEASIBLE


def test_availability_above_replication_rejected(tmp_path, asym_files):
    topo, inst = asym_files
    code = cli.main(["run", "--topology", str(topo), "--instance", str(inst), "--availability", "5",
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_USAGE


def test_missing_instance_file(tmp_path):
    assert cli.main(["run", "--instance", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == cli.EXIT_USAGE


def test_config_file_and_flag_precedence(tmp_path, asym_files, caplog):
    topo, inst = asym_files
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"topology": str(topo), "instance": str(inst), "planner": "swift",
                               "out": str(tmp_path / "a")}))
    with caplog.at_level(logging.INFO, logger="crane"):
        assert cli.main(["run", "--config", str(cfg), "--planner", "crane"]) == 0
    assert [r["planner"] for r in _rows(tmp_path / "a" / "metrics.tsv")] == ["crane"]
    assert any("overrides config" in m for m in caplog.messages)
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_USAGE


def _metrics(path, rows):
    cols = cli.METRIC_COLUMNS
    path.write_text(cli._tsv([{c: r.get(c, "") for c in cols} for r in rows], cols))
    return str(path)


def test_compare(tmp_path, capsys):
    swift = _metrics(tmp_path / "s.tsv", [{"scenario": "1", "planner": "swift", "total_time_min": "300",
                                          "inter_dc_gigabits": "100", "icdf_080": "0.6"}])
    crane = _metrics(tmp_path / "c.tsv", [{"scenario": "1", "planner": "crane", "total_time_min": "210",
                                          "inter_dc_gigabits": "75", "icdf_080": "0.76"}])
    text = cli.compare([swift, crane])
    row = list(csv.DictReader(text.splitlines(), delimiter="\t"))[0]
    assert row["time_improvement_pct"] == "30.00" and row["traffic_improvement_pct"] == "25.00"
    assert (row["icdf_080_baseline"], row["icdf_080_candidate"]) == ("0.6", "0.76")
    same = list(csv.DictReader(cli.compare([swift, swift]).splitlines(), delimiter="\t"))
    assert same[0]["time_improvement_pct"] == "0.00"
    assert cli.main(["compare", swift, crane]) == 0
    assert "30.00" in capsys.readouterr().out


def test_compare_identical_multi_planner_files(tmp_path):
    both = _metrics(tmp_path / "b.tsv", [
        {"scenario": "1", "planner": "swift", "total_time_min": "9", "inter_dc_gigabits": "9", "icdf_080": "0.5"},
        {"scenario": "1", "planner": "crane", "total_time_min": "5", "inter_dc_gigabits": "5", "icdf_080": "1"},
    ])
    rows = list(csv.DictReader(cli.compare([both, both]).splitlines(), delimiter="\t"))
    assert {r["time_improvement_pct"] for r in rows} == {"0.00"} and len(rows) == 2


def test_compare_scenario_mismatch(tmp_path):
    a = _metrics(tmp_path / "a.tsv", [{"scenario": "1", "planner": "swift", "total_time_min": "1", "inter_dc_gigabits": "1"}])
    b = _metrics(tmp_path / "b.tsv", [{"scenario": "2", "planner": "crane", "total_time_min": "1", "inter_dc_gigabits": "1"}])
    with pytest.raises(cli.ScenarioMismatchError):
        cli.compare([a, b])
    assert cli.main(["compare", a, b]) == cli.EXIT_USAGE
    with pytest.raises(ValueError):
        cli.compare([a])


def test_export_ilp_and_dump_instance(tmp_path, asym_files):
    topo, inst = asym_files
    lp = tmp_path / "m.lp"
    assert cli.main(["export-ilp", "--topology", str(topo), "--instance", str(inst), "--horizon", "3",
                     "--out", str(lp)]) == 0
    text = lp.read_text()
    assert text.startswith("\\") and "Subject To" in text and text.rstrip().endswith("End")
    dumped = tmp_path / "s1.json"
    assert cli.main(["dump-instance", "--scenario", "1", "--seed", "3", "--out", str(dumped)]) == 0
    assert len(json.loads(dumped.read_text())["partitions"]) == 512


def test_generated_scenario_run(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--scenario", "1", "--planner", "all", "--seed", "42", "--out", str(out)]) == 0
    rows = {r["planner"]: r for r in _rows(out / "metrics.tsv")}
    assert set(rows) == {"crane", "swift"}
    assert int(rows["crane"]["total_time_min"]) < int(rows["swift"]["total_time_min"])
    assert rows["crane"]["eq15_violations"] == "0" and rows["crane"]["seed"] == "42"
