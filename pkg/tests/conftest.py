import os
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

import _acceptance_log  # noqa: E402

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

DATA = Path(__file__).resolve().parents[1] / "src" / "g4v" / "data"


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    if _acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_log.RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
