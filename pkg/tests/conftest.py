import numpy as np
import pytest

from curvefem.geometry import make_geometry


@pytest.fixture(scope="session")
def disc():
    return make_geometry("disc")


@pytest.fixture(scope="session")
def annulus():
    return make_geometry("annulus")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
