import numpy as np
import pytest

from hybridfa.config import SystemConfig


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def small_cfg():
    return SystemConfig(K=3, N=2, L=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
