import numpy as np
import pytest

from ghzklm.design import Direction, design_pulse

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def forward():
    return design_pulse(Direction.GHZ_TO_KLM)


@pytest.fixture(scope="session")
def reverse():
    return design_pulse(Direction.KLM_TO_GHZ)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
