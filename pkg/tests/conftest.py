import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hadachain.hyperbolic import ModelSpace

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[(2, 1.0), (2, 2.0), (3, 1.0)], ids=["H2k1", "H2k2", "H3k1"])
def space(request):
    n, k = request.param
    return ModelSpace(n, k)


@pytest.fixture
def h2():
    return ModelSpace(2, 1.0)


_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and (rep.when == "call" or (rep.when == "setup" and rep.failed)):
        label = mark.args[0]
        if hasattr(item, "callspec"):
            label += f" [{item.callspec.id}]"
        _acceptance.append((label, "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict in _acceptance:
        terminalreporter.write_line(f"{verdict}  {label}")
