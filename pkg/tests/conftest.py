"""Collects acceptance verdicts and prints one line per criterion at the end of the run."""

import pytest

_VERDICTS = {}


class AcceptanceLog:
    def record(self, number, passed, detail):
        _VERDICTS[number] = (bool(passed), detail)
        return passed


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        passed, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
