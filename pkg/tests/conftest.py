import time

import pytest
from hypothesis import HealthCheck, settings

from belab.geometry import RotSymSpace
from belab.profiles import (capped_power, const, euclidean, gaussian_density, hyperbolic_like,
                            power_density, sphere_taylor)

settings.register_profile("lab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")

SESSION = {"start": time.perf_counter(), "acceptance": []}


def pytest_collection_modifyitems(session, config, items):
    # acceptance criteria run last so the runtime criterion sees the whole suite
    items.sort(key=lambda item: item.nodeid.startswith("tests/test_acceptance.py"))


def pytest_terminal_summary(terminalreporter):
    lines = SESSION["acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def flat(m=2, alpha=1.0, r_max=1000.0, density=None):
    return RotSymSpace(m, alpha, euclidean(), density or const(1.0), r_max)


@pytest.fixture
def flat2():
    return flat()


@pytest.fixture
def hyperbolic():
    return RotSymSpace(2, 1.0, hyperbolic_like(), const(1.0), 20.0)


@pytest.fixture
def gaussian():
    return RotSymSpace(2, 1.0, euclidean(), gaussian_density(), 8.0)


@pytest.fixture
def capped():
    return RotSymSpace(3, 2.0, capped_power(0.5), power_density(1.0), 200.0)


PRESET_SPACES = {
    "flat": lambda: flat(),
    "flat3": lambda: flat(3, 0.5),
    "hyperbolic": lambda: RotSymSpace(2, 1.0, hyperbolic_like(), const(1.0), 20.0),
    "hyperbolic3": lambda: RotSymSpace(3, 2.0, hyperbolic_like(), const(1.0), 10.0),
    "capped": lambda: RotSymSpace(3, 2.0, capped_power(0.5), power_density(1.0), 200.0),
    "capped2": lambda: RotSymSpace(2, 1.0, capped_power(0.25), const(1.0), 100.0),
    "gaussian": lambda: RotSymSpace(2, 1.0, euclidean(), gaussian_density(), 8.0),
    "sphere_taylor": lambda: RotSymSpace(3, 1.0, sphere_taylor(), const(1.0), 1.2),
}
