import numpy as np
import pytest

from macpolar.channels import DiscreteBimc, DiscreteMac


def random_bimc(rng, M=3) -> DiscreteBimc:
    return DiscreteBimc(rng.dirichlet(np.ones(M), size=2))


def random_mac(rng, M=4) -> DiscreteMac:
    return DiscreteMac(rng.dirichlet(np.ones(M), size=(2, 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
