"""Shared fixtures.

Every output of the DQNN layer channel and of the full-circuit oracle produced
anywhere in the suite is checked against the density-matrix invariants; the
tally is reported by the acceptance suite.
"""
import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rtlsguard import dqnn
from rtlsguard import qlinalg as ql

settings.register_profile(
    "suite", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")

DENSITY_AUDIT = {"checked": 0, "failures": []}
ACCEPTANCE_LINES = []


def _audit(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        out = fn(*args, **kwargs)
        for rho in np.reshape(out, (-1,) + np.shape(out)[-2:]):
            try:
                ql.validate_density(rho, trace_tol=1e-9, herm_tol=1e-10, eig_slack=1e-9)
            except ql.DensityMatrixError as exc:
                DENSITY_AUDIT["failures"].append(f"{fn.__name__}: {exc}")
            DENSITY_AUDIT["checked"] += 1
        return out

    return wrapper


dqnn.layer_channel = _audit(dqnn.layer_channel)
dqnn.feedforward_full_circuit = _audit(dqnn.feedforward_full_circuit)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "audit_last: run after every other test in the session")


def pytest_collection_modifyitems(items):
    # the density audit must see the channel outputs of the whole session
    items.sort(key=lambda item: item.get_closest_marker("audit_last") is not None)
