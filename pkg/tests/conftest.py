import numpy as np
import pytest

from slestates.background import minkowski, power_law, preinflation, window_family

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def record(number: int, passed: bool, detail: str):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def mink():
    """Massive Minkowski with a proper-time window on [-1, 1]."""
    return minkowski(1.0), window_family(-1.0, 1.0, 0.5, convention="proper")


@pytest.fixture(scope="session")
def kinetic():
    return power_law(0.0, 1.0), window_family(-0.3, 0.5, 0.5)


@pytest.fixture(scope="session")
def preinf():
    return preinflation(1.0), window_family(-0.3, 0.5, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
