import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hypermsf import ChemicalHypergraph, Hyperedge, from_graph  # noqa: E402


@pytest.fixture
def splitter():
    return ChemicalHypergraph(3, (Hyperedge([0], [1, 2]),))


@pytest.fixture
def cyclic3():
    return ChemicalHypergraph(
        3, tuple(Hyperedge([i], [(i + 1) % 3, (i + 2) % 3]) for i in range(3))
    )


@pytest.fixture
def k3():
    return from_graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def intro():
    """Collaboration example: hyperedges {A}, {C}, {A,B}, {A,B,C} with all members as inputs."""
    return ChemicalHypergraph(
        3,
        (Hyperedge([0]), Hyperedge([2]), Hyperedge([0, 1]), Hyperedge([0, 1, 2])),
        ("A", "B", "C"),
    )


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
