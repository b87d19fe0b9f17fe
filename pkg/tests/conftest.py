import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def other_rng():
    return np.random.default_rng(98765)
