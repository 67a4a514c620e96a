import numpy as np
import pytest

from driftcast.priors import PriorWeights


@pytest.fixture(scope="session")
def prior() -> PriorWeights:
    return PriorWeights()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
