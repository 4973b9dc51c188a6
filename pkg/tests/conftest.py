import pytest

ACCEPTANCE = {}


def record(number, ok, detail):
    """Store one acceptance outcome; printed in the terminal summary."""
    ACCEPTANCE[number] = (bool(ok), detail)


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
