from pathlib import Path

import pytest

from tmkit.dsl import parse_model

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
SCENARIOS = CORPUS / "scenarios"

VALID_FIXTURES = sorted(p for p in CORPUS.glob("*.tm") if not p.name.startswith("bad-"))


def load(name: str):
    path = CORPUS / f"{name}.tm"
    result = parse_model(path.read_text(encoding="utf-8"), file=str(path))
    assert result.ok, [str(d) for d in result.diagnostics]
    return result.bundle


@pytest.fixture(scope="session")
def corpus():
    return load


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        status, title = RESULTS[n]
        terminalreporter.write_line(f"criterion {n} {status}: {title}")
