import numpy as np
import pytest

from ceramopt.elasticity import MaterialParams
from ceramopt.shapeopt import toy_tensile_plate


@pytest.fixture(scope="session")
def toy():
    """Shipped tensile-plate scenario: (design0, pipeline, config, consts)."""
    return toy_tensile_plate(resolution=8, order=8)


@pytest.fixture
def mat():
    return MaterialParams.from_engineering(young=3.0e5, poisson=0.25, k_ic=5.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_symmetric(rng, dim, n=None, scale=1.0):
    shape = (dim, dim) if n is None else (n, dim, dim)
    a = rng.normal(scale=scale, size=shape)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def random_rotation(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
