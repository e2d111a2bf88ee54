import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from nbwalk.multigraph import bouquet, build_graph, complete_graph, cycle_graph, petersen_graph

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def k4():
    return complete_graph(4)


@pytest.fixture
def petersen():
    return petersen_graph()


@pytest.fixture
def c5():
    return cycle_graph(5)


@pytest.fixture
def one_loop():
    return bouquet(1)


@pytest.fixture
def k4_doubled():
    """K_4 with the edge 0-1 doubled."""
    return build_graph([(0, 1), (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
