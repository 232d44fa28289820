import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vgfx.model import fx_case_study  # noqa: E402

DATA = Path(__file__).resolve().parent.parent / "data"

_acceptance_lines = []


def record_acceptance(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    _acceptance_lines.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_acceptance_lines):
        terminalreporter.write_line(line)


@pytest.fixture
def case_study():
    return fx_case_study()


@pytest.fixture
def data_dir():
    return DATA
