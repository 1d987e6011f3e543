"""Shared fixtures and the acceptance-summary hook.

The acceptance module registers one line per numbered criterion in
CRITERION_LINES; the terminal-summary hook prints them as a block at the
end of the run so the verdicted criteria are readable in one place.
"""
from __future__ import annotations

import numpy as np
import pytest

from fattenlab.geometry import Circle, signed_distance, leaf_initial_data
from fattenlab.grid import Grid

# criterion number -> "criterion N <name>: PASS/FAIL (<detail>)"
CRITERION_LINES: dict[int, str] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str) -> bool:
    verdict = "PASS" if passed else "FAIL"
    CRITERION_LINES[number] = f"criterion {number:2d} {name}: {verdict} ({detail})"
    return passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERION_LINES):
        terminalreporter.write_line(CRITERION_LINES[number])


@pytest.fixture(scope="session")
def small_circle():
    """Coarse circle signed distance for cheap unit tests."""
    grid = Grid.square(128, -1.0, 1.0)
    return signed_distance(Circle((0.0, 0.0), 0.4), grid)


@pytest.fixture(scope="session")
def small_circle_u0(small_circle):
    return leaf_initial_data(small_circle, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
