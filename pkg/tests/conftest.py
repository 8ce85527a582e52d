import time
from contextlib import contextmanager

import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Context manager recording one PASS/FAIL line per acceptance criterion."""

    @contextmanager
    def run(number: int, title: str, limit: float):
        start = time.perf_counter()
        status, detail = "FAIL", ""
        try:
            yield
            elapsed = time.perf_counter() - start
            if elapsed > limit:
                detail = f" (runtime {elapsed:.1f} s exceeds {limit:g} s)"
                raise AssertionError(f"criterion {number} took {elapsed:.1f} s, limit {limit:g} s")
            status = "PASS"
        except BaseException as exc:
            if not detail:
                detail = f" ({type(exc).__name__}: {str(exc).splitlines()[0][:160] if str(exc) else ''})"
            raise
        finally:
            elapsed = time.perf_counter() - start
            line = f"criterion {number} [{title}]: {status} in {elapsed:.2f} s{detail}"
            _CRITERIA[number] = line
            print(line)

    return run


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
