"""Collects acceptance outcomes and prints them as a block at the end of the run."""

import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """``criterion(number, title, ok, detail)`` records one PASS/FAIL line and prints it."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
        print(line)
        _CRITERIA.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
