from __future__ import annotations

import numpy as np
import pytest

from secgames.core import BimatrixGame

RPS = ("Rock", "Paper", "Scissors")
RPS_PAYOFF = [[0, -1, 1], [1, 0, -1], [-1, 1, 0]]


@pytest.fixture
def rps() -> BimatrixGame:
    return BimatrixGame.from_zero_sum(RPS, RPS, RPS_PAYOFF)


@pytest.fixture
def pennies() -> BimatrixGame:
    return BimatrixGame.from_zero_sum(("H", "T"), ("H", "T"), [[1, -1], [-1, 1]])


def brute_bilinear(payoff, p, q) -> float:
    """Nine-outcome style double loop, independent of the library path."""
    total = 0.0
    for i, pi in enumerate(p):
        for j, qj in enumerate(q):
            total += pi * qj * payoff[i][j]
    return total


def random_bimatrix(rng: np.random.Generator, m: int, n: int, zero_sum: bool = False) -> BimatrixGame:
    rows = [f"r{i}" for i in range(m)]
    cols = [f"c{j}" for j in range(n)]
    a = rng.integers(-5, 6, size=(m, n)).astype(float)
    if zero_sum:
        return BimatrixGame.from_zero_sum(rows, cols, a)
    b = rng.integers(-5, 6, size=(m, n)).astype(float)
    return BimatrixGame(rows, cols, a, b)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
