import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def uniform_scores():
    return np.random.default_rng(0).uniform(0.0, 1.0, 100_000)
