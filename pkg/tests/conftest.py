import math

import pytest

from kinetic_brw import branching, spectral

FLAGSHIP_P = 1.0 + math.sqrt(2.0)


@pytest.fixture(scope="session")
def flagship_model():
    return spectral.PowerUniform(2, FLAGSHIP_P)


@pytest.fixture(scope="session")
def flagship_profile(flagship_model):
    return spectral.find_gamma_star(flagship_model)


@pytest.fixture(scope="session", autouse=True)
def warm_kernel(flagship_model):
    # one tiny run so jit compilation never lands inside a timed section
    branching.run_replicates(flagship_model, (0.5,), 4, 0)
