import numpy as np
import pytest

from micromag.core import Grid, VectorField


def random_field(grid: Grid, Ms: float = 8e5, seed: int = 0) -> VectorField:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(3,) + grid.shape)
    v /= np.linalg.norm(v, axis=0)
    return VectorField(grid, Ms * v)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
