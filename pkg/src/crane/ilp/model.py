"""Migration ILP: variables, constraint rows and objective.

Indices are 1-based in names: servers i/k, partitions j, capacitated
resources e (backbone edges, then local links), time t = 1..T.

The literal formulation has a few rows that cannot hold as printed; the
rows built here use these linear readings:

* eq5/eq6: a server that already holds the partition initially has nothing
  left to receive (remaining = |p_j| (1 - c^I_kj) - received).
* eq7: the argmin becomes two upper bounds, r <= remaining (per source pair,
  scaled by y) and r <= v.
* eq8: v_ik,t <= B_e for every edge on the path; rows for edges off the path
  get the big constant, so the family size is fixed.
* eq9: loads are allocated rates; l_e,t <= B_e is a bound.
* eq13: a migration that has started continues while data remains:
  beta x_{t+1} >= remaining_t - beta (1 - x_t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from crane.catalog import Instance
from crane.topology import PathTable, Topology


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Row:
    label: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # "<=", ">=", "="
    rhs: float


FAMILIES = tuple(f"eq{n}" for n in range(1, 18))


def x(i, j, k, t):
    return f"x_{i}_{j}_{k}_{t}"


def r(i, j, k, t):
    return f"r_{i}_{j}_{k}_{t}"


def y(i, j, k):
    return f"y_{i}_{j}_{k}"


def z(i, j, t):
    return f"z_{i}_{j}_{t}"


def d(k, j):
    return f"d_{k}_{j}"


def v(i, k, t):
    return f"v_{i}_{k}_{t}"


def l(e, t):
    return f"l_{e}_{t}"


def w(t):
    return f"w_{t}"


def default_horizon(instance: Instance, topology: Topology) -> int:
    """ceil(total created volume / smallest capacity) + number of creations."""
    demand = instance.demand()
    sizes = instance.partitions.size_map()
    volume = sum(sizes[j] for _, j in demand.creations)
    cmin = min(topology.capacities().values(), default=1.0)
    return max(1, int(math.ceil(volume / cmin - 1e-9)) + len(demand.creations))


def variable_counts(n: int, m: int, n_res: int, T: int) -> dict[str, int]:
    return {
        "x": n * n * m * T,
        "y": n * n * m,
        "z": n * m * T,
        "l": n_res * T,
        "r": n * n * m * T,
        "d": n * m,
        "v": n * n * T,
        "w": T,
    }


def constraint_counts(n: int, m: int, n_res: int, T: int) -> dict[str, int]:
    pairs = n * (n - 1)
    return {
        "eq1": n * m,
        "eq2": n * m,
        "eq3": n * m,
        "eq4": n * m * T,
        "eq5": n * m * (T - 1),
        "eq6": n * m * (T - 1),
        "eq7": 2 * pairs * m * T,
        "eq8": pairs * n_res * T,
        "eq9": n_res * T,
        "eq10": pairs * m,
        "eq11": pairs * m,
        "eq12": n * m * T,
        "eq13": pairs * m * (T - 1),
        "eq14": pairs * m * (T - 1),
        "eq15": m * T,
        "eq16": pairs * m * T,
        "eq17": T - 1,
    }


@dataclass
class ILPModel:
    servers: tuple[str, ...]
    partitions: tuple[str, ...]
    resources: tuple[str, ...]
    capacities: np.ndarray  # per resource
    sizes: np.ndarray  # per partition
    initial: np.ndarray  # servers x partitions
    final: np.ndarray
    availability: int
    g: np.ndarray  # servers x servers x resources
    T: int
    beta: float
    _rows: list[Row] | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.servers)

    @property
    def m(self) -> int:
        return len(self.partitions)

    @property
    def n_res(self) -> int:
        return len(self.resources)

    def variable_counts(self) -> dict[str, int]:
        return variable_counts(self.n, self.m, self.n_res, self.T)

    def constraint_counts(self) -> dict[str, int]:
        return constraint_counts(self.n, self.m, self.n_res, self.T)

    def objective(self) -> list[tuple[str, float]]:
        return [(w(t), 1.0) for t in range(1, self.T + 1)]

    def variables(self) -> Iterator[str]:
        n, m, E, T = self.n, self.m, self.n_res, self.T
        S, P, R, Ts = range(1, n + 1), range(1, m + 1), range(1, E + 1), range(1, T + 1)
        yield from (x(i, j, k, t) for i in S for j in P for k in S for t in Ts)
        yield from (y(i, j, k) for i in S for j in P for k in S)
        yield from (z(i, j, t) for i in S for j in P for t in Ts)
        yield from (l(e, t) for e in R for t in Ts)
        yield from (r(i, j, k, t) for i in S for j in P for k in S for t in Ts)
        yield from (d(k, j) for k in S for j in P)
        yield from (v(i, k, t) for i in S for k in S for t in Ts)
        yield from (w(t) for t in Ts)

    def binaries(self) -> Iterator[str]:
        return (name for name in self.variables() if name[0] in "xyzdw")

    def bounds(self) -> Iterator[tuple[str, float, float]]:
        """(variable, lower, upper) for continuous variables and fixed diagonals."""
        n, m, T = self.n, self.m, self.T
        for e in range(1, self.n_res + 1):
            for t in range(1, T + 1):
                yield l(e, t), 0.0, float(self.capacities[e - 1])
        for i in range(1, n + 1):
            for t in range(1, T + 1):
                yield v(i, i, t), 0.0, 0.0
            for j in range(1, m + 1):
                yield y(i, j, i), 0.0, 0.0
                for t in range(1, T + 1):
                    yield x(i, j, i, t), 0.0, 0.0
                    yield r(i, j, i, t), 0.0, 0.0

    def rows(self) -> list[Row]:
        if self._rows is None:
            self._rows = list(self._build_rows())
        return self._rows

    def _build_rows(self) -> Iterator[Row]:
        n, m, E, T, beta = self.n, self.m, self.n_res, self.T, self.beta
        S, P = range(1, n + 1), range(1, m + 1)
        cI = self.initial.astype(int)
        cF = self.final.astype(int)
        size = [float(s) for s in self.sizes]

        def others(k):
            return [i for i in S if i != k]

        for k in S:
            for j in P:
                ci, cf = cI[k - 1, j - 1], cF[k - 1, j - 1]
                yield Row(
                    f"eq1_k{k}_j{j}",
                    tuple((y(i, j, k), 1.0) for i in others(k)) + ((d(k, j), -1.0),),
                    "=",
                    float(cf - ci),
                )
        for k in S:
            for j in P:
                yield Row(f"eq2_k{k}_j{j}", ((d(k, j), 1.0),), ">=", float(cI[k - 1, j - 1] - cF[k - 1, j - 1]))
        for k in S:
            for j in P:
                terms = tuple((y(i, j, k), 1.0) for i in others(k)) or ((y(k, j, k), 0.0),)
                yield Row(f"eq3_k{k}_j{j}", terms, ">=", float(cF[k - 1, j - 1] - cI[k - 1, j - 1]))
        for i in S:
            for j in P:
                for t in range(1, T + 1):
                    yield Row(f"eq4_i{i}_j{j}_t{t}", ((z(i, j, t), beta),), ">=", float(cI[i - 1, j - 1]))
        for k in S:
            for j in P:
                need = size[j - 1] * (1 - cI[k - 1, j - 1])
                for t in range(1, T):
                    received = tuple((r(i, j, k, tp), -1.0) for i in others(k) for tp in range(1, t + 1))
                    yield Row(f"eq5_k{k}_j{j}_t{t}", received + ((z(k, j, t + 1), beta),), "<=", beta - need)
        for k in S:
            for j in P:
                need = size[j - 1] * (1 - cI[k - 1, j - 1])
                for t in range(1, T):
                    received = tuple((r(i, j, k, tp), -1.0) for i in others(k) for tp in range(1, t + 1))
                    yield Row(f"eq6_k{k}_j{j}_t{t}", received + ((z(k, j, t + 1), 1.0),), ">=", 1.0 - need)
        for i in S:
            for j in P:
                for k in others(i):
                    for t in range(1, T + 1):
                        sent = tuple((r(i, j, k, tp), 1.0) for tp in range(1, t + 1))
                        yield Row(f"eq7_rem_i{i}_j{j}_k{k}_t{t}", sent + ((y(i, j, k), -size[j - 1]),), "<=", 0.0)
                        yield Row(f"eq7_path_i{i}_j{j}_k{k}_t{t}", ((r(i, j, k, t), 1.0), (v(i, k, t), -1.0)), "<=", 0.0)
        for i in S:
            for k in others(i):
                for e in range(1, E + 1):
                    cap = float(self.capacities[e - 1]) if self.g[i - 1, k - 1, e - 1] else beta
                    for t in range(1, T + 1):
                        yield Row(f"eq8_i{i}_k{k}_e{e}_t{t}", ((v(i, k, t), 1.0),), "<=", cap)
        for e in range(1, E + 1):
            for t in range(1, T + 1):
                terms = [(l(e, t), 1.0)]
                for i in S:
                    for k in others(i):
                        if self.g[i - 1, k - 1, e - 1]:
                            terms += [(r(i, j, k, t), -1.0) for j in P]
                yield Row(f"eq9_e{e}_t{t}", tuple(terms), "=", 0.0)
        for i in S:
            for j in P:
                for k in others(i):
                    xs = tuple((x(i, j, k, t), 1.0) for t in range(1, T + 1))
                    yield Row(f"eq10_i{i}_j{j}_k{k}", xs + ((y(i, j, k), -beta),), "<=", 0.0)
        for i in S:
            for j in P:
                for k in others(i):
                    xs = tuple((x(i, j, k, t), 1.0) for t in range(1, T + 1))
                    yield Row(f"eq11_i{i}_j{j}_k{k}", xs + ((y(i, j, k), -1.0),), ">=", 0.0)
        for i in S:
            for j in P:
                for t in range(1, T + 1):
                    terms = tuple((x(i, j, k, t), 1.0) for k in others(i)) + ((z(i, j, t), -1.0),)
                    yield Row(f"eq12_i{i}_j{j}_t{t}", terms, "<=", 0.0)
        for i in S:
            for j in P:
                for k in others(i):
                    for t in range(1, T):
                        sent = tuple((r(i, j, k, tp), 1.0) for tp in range(1, t + 1))
                        yield Row(
                            f"eq13_i{i}_j{j}_k{k}_t{t}",
                            ((x(i, j, k, t + 1), beta), (x(i, j, k, t), -beta)) + sent + ((y(i, j, k), -size[j - 1]),),
                            ">=",
                            -beta,
                        )
        for i in S:
            for j in P:
                for k in others(i):
                    for t in range(1, T):
                        sent = tuple((r(i, j, k, tp), 1.0) for tp in range(1, t + 1))
                        yield Row(
                            f"eq14_i{i}_j{j}_k{k}_t{t}",
                            ((x(i, j, k, t + 1), 1.0),) + sent + ((y(i, j, k), -size[j - 1]),),
                            "<=",
                            0.0,
                        )
        for j in P:
            for t in range(1, T + 1):
                yield Row(f"eq15_j{j}_t{t}", tuple((z(i, j, t), 1.0) for i in S), ">=", float(self.availability))
        for i in S:
            for j in P:
                for k in others(i):
                    for t in range(1, T + 1):
                        yield Row(f"eq16_i{i}_j{j}_k{k}_t{t}", ((w(t), 1.0), (x(i, j, k, t), -1.0)), ">=", 0.0)
        for t in range(1, T):
            yield Row(f"eq17_t{t}", ((w(t), 1.0), (w(t + 1), -1.0)), ">=", 0.0)


def build_model(
    instance: Instance,
    topology: Topology,
    paths: PathTable,
    T: int | None = None,
    beta: float | None = None,
) -> ILPModel:
    if T is None:
        T = default_horizon(instance, topology)
    if T < 1:
        raise ModelError("horizon T must be >= 1")
    caps = topology.capacities()
    resources = tuple(caps)
    cap_arr = np.array([caps[e] for e in resources])
    sizes = np.array(instance.partitions.sizes, dtype=float)
    n = len(instance.servers)
    floor = max(float(sizes.max(initial=0.0)), float(T), float(n))
    if beta is None:
        beta = max(floor, float(cap_arr.max(initial=0.0))) + 1.0
    if not beta > floor:
        raise ModelError(f"beta={beta} must exceed max(partition size, T, |S|) = {floor}")
    if cap_arr.size and beta < cap_arr.max():
        raise ModelError(f"beta={beta} must be at least the largest capacity {cap_arr.max()}")
    r_idx = {e: q for q, e in enumerate(resources)}
    g = np.zeros((n, n, len(resources)), dtype=bool)
    for a, si in enumerate(instance.servers):
        for b, sk in enumerate(instance.servers):
            for e in paths.path(si, sk).resources:
                g[a, b, r_idx[e]] = True
    return ILPModel(
        servers=instance.servers,
        partitions=instance.partitions.ids,
        resources=resources,
        capacities=cap_arr,
        sizes=sizes,
        initial=instance.initial.matrix.copy(),
        final=instance.final.matrix.copy(),
        availability=instance.partitions.availability,
        g=g,
        T=int(T),
        beta=float(beta),
    )
