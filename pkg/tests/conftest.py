import numpy as np
import pytest

from ionlab.core import DetectionLaser, TrapConfig


@pytest.fixture
def trap():
    return TrapConfig.from_mhz(0.36)


@pytest.fixture
def laser():
    return DetectionLaser()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
