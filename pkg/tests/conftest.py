import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qvfdag.dag import Dag

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# Lines collected by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_node(theta: float, intercepts=(0.0, 0.0)) -> Dag:
    t = np.diag(np.asarray(intercepts, dtype=float))
    t[1, 0] = theta
    return Dag(2, {(0, 1)}, t)


def chain(p: int, theta: float, intercept: float = 0.0) -> Dag:
    return Dag.from_edges(p, [(j - 1, j) for j in range(1, p)], weight=theta, intercept=intercept)
