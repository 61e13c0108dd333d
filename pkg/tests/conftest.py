import itertools

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    ACCEPTANCE_LINES.append((number, "PASS" if passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{status}] criterion {number}: {detail}")


def all_permutation_matrices(n):
    for perm in itertools.permutations(range(n)):
        P = np.zeros((n, n))
        P[np.arange(n), perm] = 1.0
        yield P


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
