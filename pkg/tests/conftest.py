from pathlib import Path

import pytest

from sclego import data_path
from sclego.cli import main

GOLDEN = Path(__file__).parent / "golden"
DATA = Path(str(data_path()))


@pytest.fixture
def run_cli(tmp_path, capsys):
    """Run the CLI in-process; returns (exit code, out dir, stdout, stderr)."""

    def run(*argv, out=None):
        out = Path(out or tmp_path / "out")
        code = main([*argv, "--out", str(out)])
        captured = capsys.readouterr()
        return code, out, captured.out, captured.err

    return run


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(capsys):
    """Record one PASS/FAIL line for an acceptance criterion, then assert."""

    def check(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
