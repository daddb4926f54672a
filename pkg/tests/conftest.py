from __future__ import annotations

import pytest

_REPORT: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion, echoed after the run."""

    def _record(criterion: int, name: str, measured: str, target: str, passed: bool) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {criterion:>2} {name}: {measured} (target {target})"
        _REPORT.append(line)
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
