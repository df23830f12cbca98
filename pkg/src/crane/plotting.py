"""Optional figures for a run directory. Kept apart from the harness so the
metric tables never depend on matplotlib."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# no timestamps or version strings, so reruns give identical files
_PNG_META = {"Software": None}
COLORS = {"crane": "#1b7837", "swift": "#b2182b", "exact": "#2166ac"}


def _bars(rows: Sequence[Mapping[str, str]], column: str, ylabel: str, path: Path) -> Path:
    scenarios = list(dict.fromkeys(r["scenario"] for r in rows))
    planners = list(dict.fromkeys(r["planner"] for r in rows))
    width = 0.8 / max(1, len(planners))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for n, planner in enumerate(planners):
        xs, ys = [], []
        for s, scen in enumerate(scenarios):
            for r in rows:
                if r["scenario"] == scen and r["planner"] == planner:
                    xs.append(s + n * width)
                    ys.append(float(r[column]))
        ax.bar(xs, ys, width, label=planner, color=COLORS.get(planner))
    ax.set_xticks([s + width * (len(planners) - 1) / 2 for s in range(len(scenarios))])
    ax.set_xticklabels(scenarios)
    ax.set_xlabel("scenario")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def _icdf(curves: Mapping[tuple[str, str], Sequence[tuple[float, float]]], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for (scen, planner), pts in curves.items():
        style = "-" if planner == "crane" else "--"
        ax.step([a for a, _ in pts], [p for _, p in pts], style, where="post", label=f"{scen} {planner}")
    ax.set_xlabel("availability level")
    ax.set_ylabel("P(availability >= level)")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def render(rows, curves, out_dir) -> list[Path]:
    """Write migration time, inter-DC traffic and availability ICDF figures."""
    out = Path(out_dir) / "figures"
    out.mkdir(parents=True, exist_ok=True)
    return [
        _bars(rows, "total_time_min", "migration time (min)", out / "migration_time.png"),
        _bars(rows, "inter_dc_gigabits", "inter-DC traffic (Gb)", out / "traffic.png"),
        _icdf(curves, out / "availability_icdf.png"),
    ]
