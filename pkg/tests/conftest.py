import numpy as np
import pytest

from planarcontact.model import RobotModel


@pytest.fixture
def arm():
    return RobotModel.uniform()


@pytest.fixture
def odd_arm():
    # non-uniform links so symmetric shortcuts cannot hide mistakes
    return RobotModel(
        lengths=[0.45, 0.6, 0.35, 0.5],
        widths=[0.1, 0.07, 0.09, 0.06],
        masses=[1.3, 0.8, 1.1, 0.6],
        inertias=[0.03, 0.025, 0.012, 0.02],
        com_offsets=[0.2, 0.35, 0.1, 0.3],
        gravity=[0.7, -9.81],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
