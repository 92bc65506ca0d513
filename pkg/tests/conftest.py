import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from uqdc import (
    DEMO_GMM,
    QuantizationSchedule,
    make_cosine_schedule,
)

# Experiment grid shared across tests: a 50-step squared-cosine schedule and
# the timesteps every sweep and ablation is run on.
T_GRID = (1, 2, 5, 10, 20, 30, 40)


@pytest.fixture(scope="session")
def cos50():
    return make_cosine_schedule(50)


@pytest.fixture(scope="session")
def qs50(cos50):
    return QuantizationSchedule.from_variance(cos50)


@pytest.fixture(scope="session")
def demo_gmm():
    return DEMO_GMM


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
