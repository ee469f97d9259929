import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flashsim import presets
from flashsim.regime import classify_market

settings.register_profile("default", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def ex1():
    return presets.example1()


@pytest.fixture(scope="session")
def ex2():
    return presets.example2()


@pytest.fixture(scope="session")
def ex3():
    return presets.example3()


@pytest.fixture(scope="session")
def report2(ex2):
    return classify_market(ex2)


@pytest.fixture(scope="session")
def report3(ex3):
    return classify_market(ex3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
