import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ppsm import shapes

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def tet():
    return shapes.tetrahedron()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
