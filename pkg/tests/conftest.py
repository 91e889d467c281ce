import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""

    def record(label: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
