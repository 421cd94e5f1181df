"""Shared fixtures; collects acceptance results for the terminal summary."""

import time

import pytest

ACCEPTANCE: dict = {}


class _Recorder:
    def __init__(self, key: str):
        self.key = key
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def __call__(self, passed: bool, detail: str, budget: float | None = None) -> bool:
        dt = self.elapsed()
        within = budget is None or dt < budget
        ok = bool(passed) and within
        timing = f"{dt:.1f}s" + (f" (budget {budget:.0f}s)" if budget is not None else "")
        ACCEPTANCE[self.key] = (ok, f"{detail}; {timing}")
        return ok


@pytest.fixture
def record(request):
    """``record(passed, detail, budget)`` stores one acceptance line for this test."""
    return _Recorder(request.node.name)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split("_")[1]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
