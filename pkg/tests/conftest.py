import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


class _Criterion:
    def __init__(self, rows, number, title):
        self.rows, self.number, self.title = rows, number, title

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        self.rows.append(f"criterion {self.number}: {status}  {self.title}")
        return False


@pytest.fixture
def criterion(request):
    """``with criterion(n, title):`` records one PASS/FAIL line for the run summary."""
    rows = request.config.stash.setdefault(_ACCEPTANCE, [])
    return lambda number, title: _Criterion(rows, number, title)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(_ACCEPTANCE, [])
    if rows:
        terminalreporter.section("acceptance criteria")
        for row in sorted(rows, key=lambda r: int(r.split()[1].rstrip(":"))):
            terminalreporter.write_line(row)
