import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(k: int, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {k:2d}  {detail}"
        _VERDICTS.setdefault(k, []).append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_VERDICTS):
        for line in _VERDICTS[k]:
            terminalreporter.write_line(line)
