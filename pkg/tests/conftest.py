import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from modpulse.bloch import PeriodicCoefficient, bloch_point  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def const():
    return PeriodicCoefficient.constant()


@pytest.fixture(scope="session")
def cosine():
    return PeriodicCoefficient((1.0, 0.3), label="rho")


@pytest.fixture(scope="session")
def const_point(const):
    return bloch_point(const, 0.35, 0, 32)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
