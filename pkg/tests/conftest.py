import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"
ACCEPTANCE_RESULTS = []


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    """(root, train manifest, test manifest) for the seeded synthetic corpus."""
    from adscreen.synthetic import make_corpus

    root = tmp_path_factory.mktemp("synthetic")
    train, test = make_corpus(root, n_per_class=60, seed=0, test_fraction=0.3)
    return root, train, test
