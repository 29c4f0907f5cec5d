"""Collects one pass/fail line per acceptance criterion and prints them at the end of the run."""

import pytest

_RESULTS: list[tuple[str, bool, str]] = []


class Criterion:
    def __init__(self, name: str):
        self.name = name
        self.detail = ""

    def check(self, ok: bool, detail: str) -> None:
        self.detail = detail
        _RESULTS.append((self.name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} {self.name}: {detail}")
        assert ok, f"{self.name}: {detail}"


@pytest.fixture
def criterion(request):
    return Criterion(request.node.get_closest_marker("criterion").args[0])



def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
