import pytest

_REPORT: list[str] = []


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""

    def add(criterion: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        _REPORT.append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
