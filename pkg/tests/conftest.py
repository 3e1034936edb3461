import logging
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ducsim.fixtures import fixture_a, fixture_b, fixture_c  # noqa: E402

logging.getLogger("ducsim").setLevel(logging.ERROR)


@pytest.fixture
def fx_a():
    return fixture_a()


@pytest.fixture
def fx_b():
    return fixture_b()


@pytest.fixture(scope="session")
def fx_c():
    return fixture_c()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
