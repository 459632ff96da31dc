import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlselect.verify import fixture

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_data():
    """n=60, p=5, true model (0, 1)."""
    return fixture(60, 5, [1.5, -1.2, 0.0, 0.0, 0.0], seed=3)


@pytest.fixture(scope="session")
def two_col():
    """n=100, p=2, true model (0,)."""
    return fixture(100, 2, [1.0, 0.0], seed=7)


_REPORT = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record a one-line verdict for the acceptance summary."""
    lines = request.config.stash.setdefault(_REPORT, [])

    def add(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
