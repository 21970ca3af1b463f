from contextlib import contextmanager

import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


@contextmanager
def criterion(number: int, title: str):
    """Record one acceptance criterion as PASS or FAIL.

    The body fills ``detail`` with measured values; any exception marks the
    criterion failed and is re-raised.
    """
    detail: dict = {}
    try:
        yield detail
    except BaseException:
        _CRITERIA[number] = (False, _line(number, title, detail, "FAIL"))
        print(_CRITERIA[number][1])
        raise
    _CRITERIA[number] = (True, _line(number, title, detail, "PASS"))
    print(_CRITERIA[number][1])


def _line(number, title, detail, status):
    values = ", ".join(f"{k}={v}" for k, v in detail.items())
    return f"criterion {number} {status}: {title}" + (f" [{values}]" if values else "")


@pytest.fixture
def acceptance():
    return criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number][1])
