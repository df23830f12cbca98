import pytest

from crane.catalog import Configuration, Instance, PartitionSet
from crane.fixtures import single_server_dcs, walkthrough_instance, walkthrough_topology
from crane.topology import Edge, Topology, build_paths


def line_topology(caps=(10.0, 10.0)) -> Topology:
    """Servers a, b, c in their own data centers along a line."""
    return Topology(
        servers=("a", "b", "c"),
        server_dc={"a": "A", "b": "B", "c": "C"},
        dc_node={"A": "na", "B": "nb", "C": "nc"},
        edges=(Edge("e_ab", "na", "nb", caps[0]), Edge("e_bc", "nb", "nc", caps[1])),
    )


def make_instance(servers, sizes, initial, final, R=1, A=1, name="t") -> Instance:
    ids = tuple(sizes)
    parts = PartitionSet(ids, tuple(float(sizes[p]) for p in ids), replication=R, availability=A)
    return Instance(
        parts,
        Configuration.from_pairs(servers, ids, initial),
        Configuration.from_pairs(servers, ids, final),
        name=name,
    )


@pytest.fixture
def line():
    topo = line_topology()
    return topo, build_paths(topo)


@pytest.fixture(scope="session")
def walkthrough():
    topo = walkthrough_topology()
    return topo, build_paths(topo), walkthrough_instance()


@pytest.fixture
def tri():
    topo = single_server_dcs({(1, 2): 10.0, (1, 3): 5.0, (2, 3): 1.0})
    return topo, build_paths(topo)


# acceptance criteria report one line each at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
