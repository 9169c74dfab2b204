import numpy as np
import pytest
from hypothesis import settings

from martrace.groupfourier import parse_builtin
from martrace.subspace import extremal_vectors

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grad22():
    return parse_builtin("builtin:grad:mu=2,d=2")


@pytest.fixture(scope="session")
def div42():
    return parse_builtin("builtin:div:mu=4,d=2")


@pytest.fixture(scope="session")
def grad22_extremals(grad22):
    return extremal_vectors(grad22.subspace, 0.5)


@pytest.fixture(scope="session")
def div42_extremals(div42):
    return extremal_vectors(div42.subspace, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, collected by tests/test_acceptance.py and printed at the end of the run

_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = (title, passed, detail)
        print(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
