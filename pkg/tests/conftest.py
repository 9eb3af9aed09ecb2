import re

import pytest

_ACCEPTANCE = []


@pytest.fixture
def record(request):
    """Record one acceptance line: ``record(ok, detail)``; returns ``ok``."""
    number = int(re.match(r"test_c(\d+)", request.node.name).group(1))
    title = request.node.function.__doc__.strip().splitlines()[0]
    seen = []

    def _record(ok, detail=""):
        seen.append(True)
        _ACCEPTANCE.append((number, bool(ok), title, detail))
        return ok

    yield _record
    if not seen:
        _ACCEPTANCE.append((number, False, title, "did not complete"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, title, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        tag = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{tag}] {number:2d}. {title}: {detail}")
