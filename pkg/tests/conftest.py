import numpy as np
import pytest

from weighted_gc.coding import build_scheme, validate_params
from weighted_gc.data import synth_regression

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scheme():
    return build_scheme(validate_params(6, 4, 3))


@pytest.fixture(scope="session")
def large_scheme():
    return build_scheme(validate_params(50, 20, 30))


@pytest.fixture(scope="session")
def synth0():
    return synth_regression(0)


@pytest.fixture
def report():
    """Record a one-line verdict for the acceptance summary."""

    def _report(criterion: str, ok: bool | None, detail: str):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"[{status}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
