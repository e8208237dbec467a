import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from seedbank.measure import SeedBankMeasure

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def one_atom():
    return SeedBankMeasure.discrete([(1.0, 1.0)])


@pytest.fixture
def two_atoms():
    return SeedBankMeasure.discrete([(0.5, 1.0), (2.0, 1.0)])


@pytest.fixture
def gamma21():
    return SeedBankMeasure.gamma(2.0, 1.0, 1.0)


def within_se(estimate, target, se, k=3.0):
    return abs(estimate - target) <= k * se
