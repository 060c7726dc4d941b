import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sepp_green.gridding import GridSpec
from sepp_green.hawkes_sim import SimSpec, simulate
from sepp_green.ingest import EventCatalog

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def catalog(t, x, y, **kw):
    return EventCatalog.from_arrays(np.asarray(t, float), np.asarray(x, float), np.asarray(y, float), **kw)


@pytest.fixture
def small_grid():
    return GridSpec(dx=0.25, dt=1.0, nx=8, ny=8, nt=30, origin=(-1.0, -1.0), radius_km=1.0)


@pytest.fixture(scope="session")
def synthetic_small():
    """~900 events over 120 days: quick to fit with every method."""
    mu = 900 * 0.5 / (math.pi * 25 * 120)
    return simulate(SimSpec(mu=mu, horizon=120, seed=7))


# -- acceptance reporting ------------------------------------------------------

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        _ACCEPTANCE.append((label, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{label}: {'PASS' if ok else 'FAIL'} | {detail}")
