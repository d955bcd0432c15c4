import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from zkt.pcs import setup  # noqa: E402

settings.register_profile("zkt", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile(os.environ.get("ZKT_HYPOTHESIS_PROFILE", "zkt"))

MODEL_DEGREE = 1 << 15

# criterion id -> (passed, detail); printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def srs():
    return setup(b"zkt-tests", 1024)


@pytest.fixture(scope="session")
def model_srs():
    return setup(b"zkt-model-tests", MODEL_DEGREE)


@pytest.fixture(scope="session")
def relu_srs():
    # relu tables at scale 6 hold 2^13 entries
    return setup(b"zkt-relu", 1 << 13)


@pytest.fixture(scope="session")
def gen(srs):
    from support import Gen

    return Gen(srs, seed=1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
