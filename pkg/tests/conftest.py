import numpy as np
import pytest

from frist import synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def stripes_64():
    return synthetic.blocks_and_stripes((64, 64))


@pytest.fixture(scope="session")
def gradient_64():
    return synthetic.linear_gradient((64, 64))
