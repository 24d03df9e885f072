from pathlib import Path

import pytest

from qeck.code_ingest import ingest_jsonl
from qeck.qa_ingest import build_qa_index, read_pairs_jsonl
from qeck.text import AnalyzerConfig

DATA = Path(__file__).parent / "data"
PLANTED = DATA / "planted"
PLANTED_SNIPPET = "demo/ui/ScreenUtils.java#grabRootBitmap@1"


@pytest.fixture(scope="session")
def analyzer():
    return AnalyzerConfig()


@pytest.fixture(scope="session")
def planted_qa(analyzer):
    return build_qa_index(read_pairs_jsonl(PLANTED / "qa_pairs.jsonl"), analyzer)


@pytest.fixture(scope="session")
def planted_code(analyzer):
    return ingest_jsonl(PLANTED / "snippets.jsonl", analyzer)


# criterion number -> (passed, description, seconds); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, description, seconds = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  [{number:>2}] {description} ({seconds:.3f}s)")
