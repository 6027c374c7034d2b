import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hyperising.model import ModelParams

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def deformed7():
    return ModelParams(J=2.0, h=1.05, N=7, l_max=3.0, m=0.25)


_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = dict(item.user_properties).get("detail", "")
        status = "PASS" if rep.passed and not hasattr(rep, "wasxfail") else "FAIL"
        if hasattr(rep, "wasxfail") and rep.passed:
            status = "PASS (xfail did not trigger)"
        _CRITERIA.append((mark.args[0], status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid, status, detail in _CRITERIA:
        terminalreporter.write_line(f"criterion {cid}: {status}  {detail}")
