import math

import numpy as np
import pytest

from dcapep.classes import FunctionClassParams

INF = math.inf


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def F(mu=0.0, L=INF):
    return FunctionClassParams(mu, L)
