import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kinflock.model import PhaseGrid, SpaceGrid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def unit_grid():
    return SpaceGrid(0.0, 1.0, 16, "periodic")


@pytest.fixture
def phase_grid():
    return PhaseGrid(SpaceGrid(0.0, 1.0, 16, "periodic"), 8.0, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
