from __future__ import annotations

import pytest

from acceptance_report import REPORT


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not REPORT.entries:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in REPORT.lines():
        tr.write_line(line)


@pytest.fixture
def report():
    return REPORT
