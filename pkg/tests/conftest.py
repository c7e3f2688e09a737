import numpy as np
import pytest

from epicost.graph import Graph

_ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE, key=lambda s: (int(s.split()[1].rstrip(":").split(".")[0]),
                                                   s)):
        terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    """Record one 'CRITERION k: PASS|FAIL detail' line for the end-of-run summary."""

    def record(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [0, 1, 2], [1, 2, 0])


@pytest.fixture
def star():
    # K_{1,4}: hub 0, leaves 1..4
    return Graph.from_edges(5, [0, 0, 0, 0], [1, 2, 3, 4])


@pytest.fixture
def path4():
    return Graph.from_edges(4, [0, 1, 2], [1, 2, 3])


def dense_to_graph(A):
    r, c = np.nonzero(np.triu(A, 1))
    return Graph.from_edges(A.shape[0], r, c)
