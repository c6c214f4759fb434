from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from ahtsim.logicsim import wrap_outputs
from ahtsim.netlist import load_benchmark

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def c432():
    return load_benchmark("c432")


@pytest.fixture(scope="session")
def c880():
    return load_benchmark("c880")


@pytest.fixture(scope="session")
def wrapped_c432(c432):
    return wrap_outputs(c432)


@pytest.fixture(scope="session")
def wrapped_c880(c880):
    return wrap_outputs(c880)
