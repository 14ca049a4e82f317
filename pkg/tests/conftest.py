import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False,
                     help="run tests marked slow (n=4 integral identity)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance bookkeeping: each criterion test records its parts here and the
# terminal summary prints one PASS/FAIL line per criterion
_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    def record(number: int, part: str, ok: bool, detail: str = "") -> bool:
        _CRITERIA.setdefault(number, []).append((part, bool(ok), detail))
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        parts = _CRITERIA[k]
        ok = all(good for _, good, _ in parts)
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}")
        for part, good, detail in parts:
            tr.write_line(f"      {'pass' if good else 'FAIL'}  {part}  {detail}")
