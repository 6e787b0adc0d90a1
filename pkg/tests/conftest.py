import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from purex.core import build_instance

settings.register_profile("purex", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("purex")

SETUP1_A = np.array([[1, 1, 1, 0, 0, 0, 0], [0, 0, 0, 1, 1, 0, 0]], dtype=float) - 0.5
SETUP1_HARD = [1.5, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1]
SETUP1_EASY = [1.5, 1.0, 1.3, 0.4, 0.3, 0.2, 0.1]
PI_STAR_SETUP1 = np.array([0.5, 0, 0, 0.5, 0, 0, 0])


@pytest.fixture
def setup1_hard():
    return build_instance(SETUP1_HARD, 1.0, SETUP1_A, delta=0.01)


@pytest.fixture
def setup1_hard_zero_noise():
    return build_instance(SETUP1_HARD, 0.0, SETUP1_A, cost_noise_sd=0.0, delta=0.01)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
