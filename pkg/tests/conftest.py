import os
import sys
import warnings

import pytest
from hypothesis import HealthCheck, settings

from otelbaev.measure import Atoms, Cantor, Family, HarmonicComb, Lattice, SignedMeasureSpec

settings.register_profile(
    "default",
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", "40")),
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

sys.path.insert(0, os.path.dirname(__file__))

SPEC_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "specs")


@pytest.fixture(autouse=True)
def _quiet_oracle_warnings():
    from otelbaev.oracle import OracleWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OracleWarning)
        yield


@pytest.fixture
def even_square():
    return SignedMeasureSpec((Family("even_square"),))


@pytest.fixture
def unit_cantor():
    return [Cantor(0.0, 1.0, 1.0)]


@pytest.fixture
def abs_lattice():
    return SignedMeasureSpec((Lattice(1.0, 0.5, "abs_index"),))


@pytest.fixture
def harmonic():
    return SignedMeasureSpec((HarmonicComb(),))


@pytest.fixture
def delta_well():
    return SignedMeasureSpec((), (Atoms((0.0,), (1.0,)),), beta=1.0)


@pytest.fixture
def spec_dir():
    return SPEC_DIR


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
