import numpy as np
import pytest

from krescale import Tensor


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rand_tensor(rng, shape, lo=-2.0, hi=2.0):
    return Tensor.from_array(rng.uniform(lo, hi, size=shape))
