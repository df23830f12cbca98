"""Check a simulated schedule against every constraint family of the model.

The trace is read off a simulation report: step s is model time t = s + 1,
x is on while a transfer progresses, r are its rates, y marks the source that
delivered each new copy, z is the set of complete copies (deletions only
happen at the horizon, as in the model) and w is on up to the total
migration time. Duplicate pushes that did not deliver are extra traffic
outside the model's schedule: they count towards recorded link loads but not
towards x, r or y (see ``SimulationReport.redundant_pushes``). Availability
(eq15) is checked on the replicas that actually served reads, which for a
Swift run excludes copies scheduled for removal.

Rows whose literal form assumes integral rates (eq6, eq13, eq14) are checked
for what they enforce: a finished copy is a holder, a started migration runs
until its data is sent, and stops afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crane.ilp.model import ILPModel
from crane.netsim import SimulationReport

TOL = 1e-6


class TraceMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    family: str
    label: str

    def __str__(self):
        return self.label


def validate(report: SimulationReport, model: ILPModel) -> list[Violation]:
    if report.servers != model.servers or report.partitions != model.partitions:
        raise TraceMismatchError("report and model cover different servers or partitions")
    if tuple(report.resources) != tuple(model.resources):
        raise TraceMismatchError("report and model use different resources")
    horizon = report.served.shape[0]
    if horizon > model.T or report.total_time > model.T:
        raise TraceMismatchError(f"trace horizon {max(horizon, report.total_time)} exceeds model horizon T={model.T}")

    n, m, T = model.n, model.m, model.T
    s_idx = {s: i for i, s in enumerate(model.servers)}
    p_idx = {p: j for j, p in enumerate(model.partitions)}
    size = model.sizes
    out: list[Violation] = []

    def bad(family, label):
        out.append(Violation(family, label))

    # y / d from the trace: the first finished transfer delivers each copy
    ysum = np.zeros((n, m), dtype=int)  # per (destination, partition)
    delivered: dict[tuple[str, str], object] = {}
    for tr in report.transfers:
        if tr.state != "done":
            continue
        key = (tr.task.destination, tr.task.partition)
        best = delivered.get(key)
        if best is None or (tr.end, tr.task.source) < (best.end, best.task.source):
            delivered[key] = tr
    pushed: dict[tuple[int, int, int], list] = {}
    for tr in delivered.values():
        key = (s_idx[tr.task.source], p_idx[tr.task.partition], s_idx[tr.task.destination])
        pushed.setdefault(key, []).append(tr)
    for (i, j, k) in pushed:
        ysum[k, j] += 1
    dmat = model.initial & ~model.final

    cI = model.initial.astype(int)
    cF = model.final.astype(int)
    for k in range(n):
        for j in range(m):
            if cI[k, j] + ysum[k, j] - int(dmat[k, j]) != cF[k, j]:
                bad("eq1", f"eq1_k{k + 1}_j{j + 1}")
            if int(dmat[k, j]) < cI[k, j] - cF[k, j]:
                bad("eq2", f"eq2_k{k + 1}_j{j + 1}")
            if ysum[k, j] < cF[k, j] - cI[k, j]:
                bad("eq3", f"eq3_k{k + 1}_j{j + 1}")

    # per-pair rate series over model time (index 0 == t=1)
    series: dict[tuple[int, int, int], np.ndarray] = {}
    for key, trs in pushed.items():
        arr = np.zeros(T)
        for tr in trs:
            arr[tr.start : tr.start + len(tr.rates)] += tr.rates
        series[key] = arr
    xs: dict[tuple[int, int, int], np.ndarray] = {}
    for key, trs in pushed.items():
        on = np.zeros(T, dtype=bool)
        for tr in trs:
            on[tr.start : tr.start + len(tr.rates)] = True
        xs[key] = on

    # z: complete copies, never removed before the horizon
    first = np.full((n, m), T + 1, dtype=int)  # first model time t with z=1
    first[model.initial] = 1
    for (k, j), step in report.promotions.items():
        first[s_idx[k], p_idx[j]] = min(first[s_idx[k], p_idx[j]], step + 1)

    # eq4: initial holders hold throughout
    # (first == 1 for them by construction; a promotion cannot revoke it)
    for i, j in zip(*np.nonzero(model.initial & (first > 1))):
        bad("eq4", f"eq4_i{i + 1}_j{j + 1}")

    # eq5/eq6: holder from t+1 exactly when everything was received by t
    received: dict[tuple[int, int], np.ndarray] = {}
    for (i, j, k), arr in series.items():
        received[(k, j)] = received.get((k, j), 0) + np.cumsum(arr)
    candidates = set(received) | {(s_idx[k], p_idx[j]) for k, j in report.promotions}
    for k, j in sorted(candidates):
        if model.initial[k, j]:
            continue
        need = size[j]
        got = received.get((k, j))
        done = np.flatnonzero(got >= need - TOL * max(need, 1.0)) if got is not None else np.array([], dtype=int)
        done_t = int(done[0]) + 1 if done.size else None  # model time when complete
        promo = int(first[k, j])
        if promo <= T and (done_t is None or promo < done_t + 1):
            bad("eq5", f"eq5_k{k + 1}_j{j + 1}_t{promo - 1}")
        if done_t is not None and done_t < T and promo > done_t + 1:
            bad("eq6", f"eq6_k{k + 1}_j{j + 1}_t{done_t}")

    caps = model.capacities
    loads = np.zeros((T, model.n_res))
    for (i, j, k), arr in series.items():
        on_path = np.flatnonzero(model.g[i, k])
        vcap = caps[on_path].min() if on_path.size else np.inf
        sent = np.cumsum(arr)
        for t in np.flatnonzero(arr > 0):
            before = sent[t] - arr[t]
            if arr[t] > size[j] - before + TOL * max(size[j], 1.0):
                bad("eq7", f"eq7_rem_i{i + 1}_j{j + 1}_k{k + 1}_t{t + 1}")
            if arr[t] > vcap + TOL * max(vcap if np.isfinite(vcap) else 1.0, 1.0):
                bad("eq7", f"eq7_path_i{i + 1}_j{j + 1}_k{k + 1}_t{t + 1}")
        for e in on_path:
            loads[:, e] += arr

    # eq8 holds by construction of v as the static path bottleneck; eq9 on
    # scheduled rates, and the recorded loads (duplicates included) must cover them
    recorded = np.zeros((T, model.n_res))
    recorded[: report.loads.shape[0]] = report.loads
    slack = TOL * np.maximum(caps, 1.0)
    over = (loads > caps + slack) | (recorded > caps + slack) | (recorded < loads - slack)
    for t, e in zip(*np.nonzero(over)):
        bad("eq9", f"eq9_e{e + 1}_t{t + 1}")

    for (i, j, k), on in xs.items():
        if on.sum() > model.beta:
            bad("eq10", f"eq10_i{i + 1}_j{j + 1}_k{k + 1}")

    # eq12: an outgoing migration needs a complete local copy, one per partition at a time
    outgoing: dict[tuple[int, int], np.ndarray] = {}
    for (i, j, k), on in xs.items():
        outgoing[(i, j)] = outgoing.get((i, j), 0) + on.astype(int)
    for (i, j), count in sorted(outgoing.items()):
        for t in np.flatnonzero(count):
            if count[t] > int(first[i, j] <= t + 1):
                bad("eq12", f"eq12_i{i + 1}_j{j + 1}_t{t + 1}")

    # eq13/eq14: once started, run until sent; then stop
    for (i, j, k), on in xs.items():
        arr = series[(i, j, k)]
        need = size[j] * len(pushed[(i, j, k)])
        finished = need - np.cumsum(arr) <= TOL * max(need, 1.0)
        for t in np.flatnonzero(on[:-1] & ~finished[:-1] & ~on[1:]):
            bad("eq13", f"eq13_i{i + 1}_j{j + 1}_k{k + 1}_t{t + 1}")
        for t in np.flatnonzero(finished[:-1] & on[1:]):
            bad("eq14", f"eq14_i{i + 1}_j{j + 1}_k{k + 1}_t{t + 1}")

    served = report.served
    for s, j in zip(*np.nonzero(served < model.availability)):
        bad("eq15", f"eq15_j{j + 1}_t{s + 1}")

    wvec = np.zeros(T, dtype=int)
    wvec[: report.total_time] = 1
    for (i, j, k), on in xs.items():
        for t in np.flatnonzero(on & (wvec == 0)):
            bad("eq16", f"eq16_i{i + 1}_j{j + 1}_k{k + 1}_t{t + 1}")
    for t in range(T - 1):
        if wvec[t] < wvec[t + 1]:
            bad("eq17", f"eq17_t{t + 1}")
    return out


def families(violations: list[Violation]) -> set[str]:
    return {v.family for v in violations}


def violation_report(violations: list[Violation]) -> str:
    """One labeled line per violated row."""
    return "".join(f"{v.family}\t{v.label}\n" for v in violations)
