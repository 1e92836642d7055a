import numpy as np
import pytest

from cyclopass.models import make_model


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def gas():
    return make_model("ideal_gas")


@pytest.fixture(scope="session")
def inductors():
    return make_model("coupled_inductors")


@pytest.fixture(scope="session")
def motor():
    return make_model("dc_motor")


@pytest.fixture(scope="session")
def microphone():
    return make_model("microphone")


@pytest.fixture(scope="session")
def exchanger():
    return make_model("heat_exchanger")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
