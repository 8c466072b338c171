import pytest

_LINES = []


@pytest.fixture
def criterion():
    """report(n, title, ok, detail): record one acceptance line, then assert."""

    def report(n, title, ok, detail):
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _LINES.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
