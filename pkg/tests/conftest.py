import sys

import pytest

from hoga.toy import cycle_graph, erdos_renyi, path_graph, two_cluster


@pytest.fixture
def p4():
    return path_graph(4)


@pytest.fixture
def c6():
    return cycle_graph(6)


@pytest.fixture
def er200():
    return erdos_renyi(200, 0.03, seed=7)


@pytest.fixture
def toy12():
    return two_cluster(6, seed=0)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
