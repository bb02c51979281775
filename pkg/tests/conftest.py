import os

import numpy as np
import pytest

from mhd2d import Grid, MHDState
from mhd2d.ic import ICSpec, make_ic


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MHD2D_FULL_ACCEPTANCE"):
        return
    skip = pytest.mark.skip(reason="workstation-scale run; set MHD2D_FULL_ACCEPTANCE=1")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)


@pytest.fixture(scope="session")
def grid128():
    return Grid(128)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(grid: Grid, seed: int = 0, amplitude: float = 0.1, r_high: float = 3.0) -> MHDState:
    return make_ic(ICSpec("random_spectrum", amplitude=amplitude, seed=seed, r_high=r_high), grid)


@pytest.fixture
def small_state(grid32):
    return random_state(grid32, seed=3, amplitude=0.5)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the session."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
