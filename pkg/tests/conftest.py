import os
import sys
from functools import lru_cache

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from opi_triangle import bounds, constraints  # noqa: E402


@lru_cache(maxsize=None)
def solved(n, mode="single", direction="max", split=constraints.OPEN_SPLIT):
    """Session-wide cache of SLP results."""
    return bounds.slp_bound(constraints.build_constraints(n, mode, split), direction)


@pytest.fixture
def solve():
    return solved


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
