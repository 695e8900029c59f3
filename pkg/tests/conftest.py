from __future__ import annotations

from pathlib import Path

import pytest

from rxo.engine import Session

CORPUS = Path(__file__).parent / "corpus"
GOLDEN = Path(__file__).parent / "golden"


def run(source: str, session: Session | None = None) -> Session:
    session = session or Session()
    for _ in session.run_script(source):
        pass
    return session


def results(source: str, session: Session | None = None) -> list:
    session = session or Session()
    return list(session.run_script(source))


@pytest.fixture
def tutorial() -> Session:
    return run((CORPUS / "tutorial.rxo").read_text())


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
