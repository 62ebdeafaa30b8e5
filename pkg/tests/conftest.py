import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from daviesgap.basis import build_frame
from daviesgap.models import build_ising_ring, build_toric_code

_acceptance_lines = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(criterion, ok, detail):
        line = f"[{criterion:>12}] {'PASS' if ok else 'FAIL'}  {detail}"
        _acceptance_lines.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ising3():
    return build_ising_ring(3)


@pytest.fixture(scope="session")
def ising4():
    return build_ising_ring(4)


@pytest.fixture(scope="session")
def toric2():
    return build_toric_code(2)


@pytest.fixture(scope="session")
def ising3_frame(ising3):
    return build_frame(ising3)


@pytest.fixture(scope="session")
def ising4_frame(ising4):
    return build_frame(ising4)


@pytest.fixture(scope="session")
def toric2_frame(toric2):
    return build_frame(toric2)
