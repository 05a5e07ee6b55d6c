from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from qsde.coefficients import Coefficient, InitialMap
from qsde.noise import StepFunction

INSTANCES = Path(__file__).resolve().parent.parent / "instances"

# filled by tests/test_acceptance.py, reported at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def scalar_phi(a: complex = -1.0) -> Coefficient:
    th = np.zeros((2, 2, 1, 1), dtype=complex)
    th[0, 0, 0, 0] = a
    return Coefficient(th)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scalar():
    return scalar_phi(), InitialMap.identity(1), StepFunction.zero(1)


@pytest.fixture
def instances_dir() -> Path:
    return INSTANCES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
