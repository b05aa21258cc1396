import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Pure functions are exercised with at least this many random cases.
PURE_CASES = 1000


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
