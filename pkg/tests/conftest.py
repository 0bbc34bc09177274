import numpy as np
import pytest

from pulsega.field import GeneLayout, gaussian_spectrum

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def carrier():
    return gaussian_spectrum(128)


@pytest.fixture(scope="session")
def layout():
    return GeneLayout()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
