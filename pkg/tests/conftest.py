import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hmspectral.basis import Geometry
from hmspectral.dynamics import StabilityWarning
from hmspectral.experiments import prepare

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"AC-{key:02d} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_stability():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        yield


@pytest.fixture(scope="session")
def disk():
    return Geometry.disk()


@pytest.fixture(scope="session")
def square():
    return Geometry.square()


@pytest.fixture(scope="session")
def setup_for():
    """prepare(geometry, n) -> (basis, grid, bare triads), cached across the session."""
    return prepare


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
