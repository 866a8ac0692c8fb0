import numpy as np
import pytest
from hypothesis import settings

from bergmc.bundle import BundleData
from bergmc.geometry import KahlerModel

settings.register_profile("suite", max_examples=60, deadline=None)
settings.load_profile("suite")

SEED = 20240607


@pytest.fixture
def plane():
    return BundleData(KahlerModel.plane(1.0))


@pytest.fixture
def sphere2():
    return BundleData(KahlerModel.sphere(2))


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)
