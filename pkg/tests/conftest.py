import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthetic import write_dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthetic")
    write_dataset(root)
    return root


# -- acceptance reporting ------------------------------------------------------

_CRITERIA = []


@pytest.fixture
def detail(request):
    """Attach a short result string to the running acceptance criterion."""
    def note(text):
        request.node.criterion_detail = text
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        text = getattr(item, "criterion_detail", "")
        if rep.skipped and isinstance(rep.longrepr, tuple):
            text = rep.longrepr[2]
        _CRITERIA.append((status, marker.args[0], text))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for status, name, text in _CRITERIA:
        line = f"{status}  {name}"
        terminalreporter.write_line(f"{line}  ({text})" if text else line)
