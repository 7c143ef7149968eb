import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

# the first call of each compiled kernel includes JIT time
settings.register_profile("default", deadline=None)
settings.load_profile("default")

_criteria: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the verdict of one acceptance criterion and fail the test if it does not hold."""
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _criteria[number] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        terminalreporter.write_line(_criteria[number])
