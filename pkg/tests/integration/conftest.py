"""Pytest fixtures for integration tests."""

import json

import pytest

from src.tools.cli import main
from tests.helpers.fixtures import ir_path


@pytest.fixture
def run_cli(capsys):
    """Run the command line in-process and return (exit code, stdout, stderr)."""

    def run(*argv: str):
        code = main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run


@pytest.fixture
def run_report(run_cli):
    """Full pipeline report as a parsed JSON document."""

    def run(*extra: str, fixture: str = "motivating_example"):
        code, out, err = run_cli(
            "report", str(ir_path(fixture)), "--no-timestamps", "--timeout-secs", "0", *extra
        )
        assert code == 0, err
        return json.loads(out)

    return run
