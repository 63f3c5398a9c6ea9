import numpy as np
import pytest

from nemel.material import IonSpecies, LeslieCoefficients, MaterialParams, Permittivity

SMOKE = LeslieCoefficients(0.2, -0.6, 0.1, 1.0, 0.5, 0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def smoke_material():
    return MaterialParams(SMOKE, Permittivity(1.0, 0.5), (IonSpecies(1.0, 1.0, 1.0), IonSpecies(-1.0, 1.0, 1.0)))


def unit_vectors(rng, shape):
    th = rng.uniform(0.0, 2.0 * np.pi, shape)
    return np.stack([np.cos(th), np.sin(th)], axis=-1)


def random_symmetric(rng, shape, scale=1.0):
    A = rng.normal(scale=scale, size=shape + (2, 2))
    return 0.5 * (A + np.swapaxes(A, -1, -2))
