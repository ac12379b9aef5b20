import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" -- {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
