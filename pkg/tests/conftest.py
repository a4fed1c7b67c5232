import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rectent import sources

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="session")
def circle_uniform():
    return sources.from_catalog("circle:uniform")


@pytest.fixture(scope="session")
def circle_vonmises():
    return sources.from_catalog("circle:vonmises:1")


@pytest.fixture(scope="session")
def torus_uniform():
    return sources.from_catalog("product:circle:uniformxcircle:uniform")


@pytest.fixture(scope="session")
def wishart2():
    return sources.from_catalog("wishart1:normal:2")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion-marked test

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when == "teardown" or (rep.when == "setup" and rep.passed):
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
    _CRITERIA[marker.args[0]] = (rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
