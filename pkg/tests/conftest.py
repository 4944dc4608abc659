import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kleingrowth.groups import gamma2, h3_rank2, schottky  # noqa: E402
from kleingrowth.hyperbolic import HPoint  # noqa: E402
from kleingrowth.orbit import orbit_sample  # noqa: E402


@pytest.fixture(scope="session")
def g2():
    return gamma2()


@pytest.fixture(scope="session")
def sch():
    return schottky()


@pytest.fixture(scope="session")
def h3():
    return h3_rank2()


@pytest.fixture(scope="session")
def shipped(g2, sch, h3):
    return [g2, sch, h3]


@pytest.fixture(scope="session")
def g2_sample14(g2):
    z = HPoint.h2(1j)
    return orbit_sample(g2, z, z, 14)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
