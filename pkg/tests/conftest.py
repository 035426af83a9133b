import pytest
from hypothesis import HealthCheck, settings

from commlab import fixtures as fx
from commlab.protocol import and_function

settings.register_profile(
    "commlab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("commlab")


@pytest.fixture
def f_and():
    return and_function()


@pytest.fixture
def mu_uniform():
    return fx.uniform_mu()


@pytest.fixture
def p1():
    return fx.p1()
