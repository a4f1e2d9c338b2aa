import numpy as np
import pytest

from mpdlab.fuchsian import octagon_group
from mpdlab.metric import Bump, BumpField, MetricField


@pytest.fixture(scope="session")
def group():
    return octagon_group()


@pytest.fixture(scope="session")
def hyperbolic(group):
    return MetricField(group)


@pytest.fixture(scope="session")
def bump():
    return BumpField((Bump(0.2 + 1.1j, 0.8, 0.05),))


@pytest.fixture(scope="session")
def perturbed(group, bump):
    return MetricField(group, conformal=bump)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


ACCEPTANCE_LINES = {}


@pytest.fixture
def record_criterion():
    """Store one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""
    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {number:02d} {title}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
