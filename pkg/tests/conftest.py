import numpy as np
import pytest

from misscov import datagen


@pytest.fixture
def gen():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def geometric_spec():
    return datagen.build_covariance(10, datagen.Spectrum.geometric(0.7), 7)


def random_symmetric(gen, d, scale=1.0):
    a = gen.standard_normal((d, d)) * scale
    return 0.5 * (a + a.T)
