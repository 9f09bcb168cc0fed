import numpy as np
import pytest

from periodic_fm.lattice import LatticeParams

K = np.pi
ALPHA = (np.pi / 2, np.pi / 2)


@pytest.fixture
def params():
    return LatticeParams(K, ALPHA, 1.0, 8)


@pytest.fixture
def small_params():
    return LatticeParams(K, ALPHA, 1.0, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
