import numpy as np
import pytest

ACCEPTANCE = {}
REPORTS = []


@pytest.fixture
def record():
    """Record one acceptance line: ``record(number, passed, detail)``."""

    def _record(number, passed, detail=""):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"[acceptance {number:2d}] {'PASS' if passed else 'FAIL'}  {detail}")

    return _record


@pytest.fixture
def report():
    """Attach a block of text (e.g. a trend table) to the terminal summary."""

    def _report(title, lines):
        REPORTS.append((title, list(lines)))
        print(title)
        print("\n".join(lines))

    return _report


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    for title, lines in REPORTS:
        terminalreporter.section(title)
        for line in lines:
            terminalreporter.write_line(line)
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
