import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("warpspace", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("warpspace")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
