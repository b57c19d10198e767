import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_matrix(rng, m, n, density=0.5, signed=False):
    from disclib.core import SetSystemMatrix
    mask = rng.random((m, n)) < density
    vals = np.where(rng.random((m, n)) < 0.5, -1.0, 1.0) if signed else np.ones((m, n))
    return SetSystemMatrix.from_dense(mask * vals)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
