import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from glstsp.tsp_core import Instance

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit_square():
    """Four corners of a 10 x 10 square; the perimeter costs 40."""
    coords = np.array([[0, 0], [10, 0], [10, 10], [0, 10]], dtype=float)
    return Instance("square", coords, "EUC_2D")


def make_instance(coords, rule="EUC_2D", name="t"):
    return Instance(name, np.asarray(coords, dtype=float), rule)


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict; returns ``ok`` so tests can assert on it."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def record(number, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
