import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cpident.dynamics import TurbineParams
from cpident.twin import make_twin_array, make_twin_truth

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return TurbineParams()


@pytest.fixture(scope="session")
def twin2():
    return make_twin_array(2)


@pytest.fixture(scope="session")
def freestream_truth():
    return make_twin_truth("freestream")


@pytest.fixture(scope="session")
def waked_truth():
    return make_twin_truth("waked")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one verdict part per call; parts of a criterion are merged in the summary."""

    def record(number, ok, detail):
        ACCEPTANCE.setdefault(number, []).append((bool(ok), detail))
        print(f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p[0] for p in parts)
        terminalreporter.write_line(f"{number:>2} {'PASS' if ok else 'FAIL'}  " + "; ".join(p[1] for p in parts))
