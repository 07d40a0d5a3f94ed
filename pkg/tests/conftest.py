import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, n, cond=None):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    if cond is None:
        vals = rng.uniform(0.5, 3.0, size=n)
    else:
        vals = np.geomspace(1.0, cond, n)
    return (q * vals) @ q.T


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def report(request):
    """Record one acceptance verdict; printed in the terminal summary."""
    def record(number, ok, detail):
        request.config._acceptance[number] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
