import sys
import warnings
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from provforge.constraints import parse_constraints  # noqa: E402
from provforge.provn import parse_seed  # noqa: E402

DATA = HERE.parent / "src" / "provforge" / "data"
FIXTURES = HERE / "fixtures"


@pytest.fixture
def docrev_text():
    return (DATA / "docrev.provn").read_text()


@pytest.fixture
def docrev(docrev_text):
    return parse_seed(docrev_text)


@pytest.fixture
def wiki_constraints():
    return parse_constraints((DATA / "wiki.constraints").read_text())


@pytest.fixture(autouse=True)
def _quiet_seed_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
