import math
import os

import pytest
from hypothesis import HealthCheck, settings

from brwlevel import Normal, OffspringLaw, TiltedPolynomialDensity, Uniform, rademacher, validate_model

settings.register_profile(
    "repro",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    print_blob=True,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repro"))

HALF_HALF = OffspringLaw.finite({1: 0.5, 2: 0.5})
BINARY = OffspringLaw.finite({2: 1.0})
LOG15 = math.log(1.5)


@pytest.fixture
def normal_model():
    return validate_model(HALF_HALF, Normal(1.0))


@pytest.fixture
def rad_model():
    return validate_model(HALF_HALF, rademacher())


@pytest.fixture
def rad_binary():
    return validate_model(BINARY, rademacher())


@pytest.fixture
def uniform_model():
    return validate_model(HALF_HALF, Uniform(1.0))


@pytest.fixture
def tilted_model():
    return validate_model(HALF_HALF, TiltedPolynomialDensity())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
