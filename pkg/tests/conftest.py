import numpy as np
import pytest
from hypothesis import settings

from capteam.capability import CapabilitySet

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def caps4():
    return CapabilitySet((2, 4, 6, 8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
