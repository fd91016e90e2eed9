import pytest

_ACCEPTANCE = {}


@pytest.fixture()
def record():
    """Store one acceptance verdict: ``record(number, passed, detail)``."""
    def store(number, passed, detail):
        _ACCEPTANCE[number] = (bool(passed), detail)
    return store


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
