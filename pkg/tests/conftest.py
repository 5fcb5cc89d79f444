import numpy as np
import pytest

from qkinetic.model import default_model, random_model
from qkinetic.operators import random_density


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def model():
    return default_model(coupling=0.5)


@pytest.fixture
def free_model():
    return default_model(coupling=0.0)


@pytest.fixture
def rand_model(rng):
    return random_model(2, rng, coupling=0.7)


@pytest.fixture
def f0(rng):
    """One-particle datum with trace norm 0.1."""
    return random_density(2, rng, norm=0.1)
