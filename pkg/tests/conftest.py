import numpy as np
import pytest

from iflt import Ensemble, center


def make_ensemble(rng, m, s, scale=1.0):
    """Centered random ensemble."""
    return center(Ensemble(scale * rng.normal(size=(m, s))))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
