import math
import warnings

import pytest
from hypothesis import settings

from multiperiodic.errors import TruncationWarning, WoodAnomalyWarning

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

LAMBDA = 2 * math.pi


@pytest.fixture(autouse=True)
def quiet_wood_warnings():
    # alpha_N = Lambda* is a cutoff for integer k; tests that care catch it explicitly.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WoodAnomalyWarning)
        warnings.simplefilter("ignore", TruncationWarning)
        yield


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Record one PASS/FAIL line for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, title, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
