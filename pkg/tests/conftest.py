import numpy as np
import pytest

from desb.network import parse_topology

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _CRITERIA.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["1-3-1", "1-5-1", "2-3-1-3-1"])
def topology(request):
    return parse_topology(request.param)
