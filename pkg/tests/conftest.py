import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from growmix import DiagonalGrowth, GrowthMixingSystem, MLMatrix  # noqa: E402


@pytest.fixture
def swap_generator():
    """Conservative 2-site mixing pattern P - I with P the swap."""
    return MLMatrix([[-1.0, 1.0], [1.0, -1.0]])


@pytest.fixture
def two_site(swap_generator):
    return GrowthMixingSystem(DiagonalGrowth([1.0, -1.0]), swap_generator)


@pytest.fixture
def rng():
    return np.random.default_rng(20240515)


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one formatted pass/fail line for the terminal summary."""
    def record(label: str, ok: bool, detail: str) -> None:
        _CRITERIA.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
