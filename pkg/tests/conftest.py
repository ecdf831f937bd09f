import pytest

ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Store one summary line per acceptance criterion."""
    def record(number, ok, detail):
        ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[number])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
