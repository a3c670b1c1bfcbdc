import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """Record one acceptance line; ``passed`` is True, False or None (skipped)."""
    def record(num, title, passed, detail=""):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {num:>3}: {title}"
        if detail:
            line += f" | {detail}"
        _RESULTS.append((num, line))
        print(line)
        return passed
    return record


def _order(result):
    num = str(result[0])
    digits = num.rstrip("abcdefghijklmnopqrstuvwxyz")
    return int(digits), num[len(digits):]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_RESULTS, key=_order):
        terminalreporter.write_line(line)
