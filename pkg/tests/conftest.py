import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chemolab.grid import make_grid

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def grid_pi_1d():
    return make_grid(1, math.pi, 32)


@pytest.fixture
def grid_pi_2d():
    return make_grid(2, math.pi, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
