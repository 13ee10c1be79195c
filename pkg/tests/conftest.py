import os

import hypothesis
import numpy as np
import pytest

from geonet.metrics import BallMetric, SphereMetric

np.seterr(all="warn", under="ignore")

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def poly(*terms):
    return tuple({"coeff": c, "powers": list(p)} for c, p in terms)


@pytest.fixture
def flat2():
    return BallMetric(2)


@pytest.fixture
def conformal_ball():
    return BallMetric(2, "conformal", 0.01, poly((1.0, (3, 0)), (-3.0, (1, 2)), (0.5, (2, 1)),
                                                 (0.7, (0, 2)), (-0.4, (1, 1))))


@pytest.fixture
def round2():
    return SphereMetric(2)


@pytest.fixture
def conformal_sphere():
    return SphereMetric(2, "conformal", 0.01, poly((1.0, (1, 1, 1)), (0.5, (2, 0, 1)), (0.7, (0, 2, 0)),
                                                   (-0.5, (1, 2, 0)), (0.3, (0, 0, 3))))
