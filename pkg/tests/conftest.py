import math

import numpy as np
import pytest

from gtcm.spectral import Grid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def grid4():
    return Grid.cube(4)


@pytest.fixture(scope="session")
def grid8():
    return Grid.cube(8)


@pytest.fixture(scope="session")
def grid16():
    return Grid.cube(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid.cube(32)


def mode(grid, k, phase=0.0, fn=np.sin):
    """fn(k . x + phase) on the grid, k in integer mode numbers."""
    x = grid.coordinates()
    arg = sum(2 * math.pi * ki * xi / li for ki, xi, li in zip(k, x, grid.lengths))
    return np.broadcast_to(fn(arg + phase), grid.shape).copy()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
