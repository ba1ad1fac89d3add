"""Shared fixtures; collects acceptance outcomes for the terminal summary."""
import pytest

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance outcome: ``record(n, passed, detail)``."""
    def _record(n, passed, detail):
        ACCEPTANCE[n] = (bool(passed), detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
