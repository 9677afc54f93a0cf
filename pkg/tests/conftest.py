import numpy as np
import pytest

from hmcmimo import build_constellation


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["QPSK", "16QAM", "64QAM"])
def constellation(request):
    return build_constellation(request.param)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line, then assert it."""

    def record(name, passed, detail=""):
        _VERDICTS.append((name, bool(passed), detail))
        assert passed, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _VERDICTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
