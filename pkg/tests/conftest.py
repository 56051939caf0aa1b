import time
from contextlib import contextmanager

import pytest

_VERDICTS: dict[int, str] = {}


@contextmanager
def _criterion(number: int, title: str, budget_s: float | None):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - t0
        if budget_s is not None:
            assert elapsed < budget_s, f"took {elapsed:.2f} s, budget {budget_s} s"
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.2f} s)"
        _VERDICTS[number] = line
        print(line)


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
