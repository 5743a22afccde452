import numpy as np
import pytest

from catbreed import DensityOperator, FockCutoff


@pytest.fixture
def cutoff20():
    return FockCutoff(20)


def random_density(rng: np.random.Generator, dimension: int) -> DensityOperator:
    """Full-rank random density operator (Wishart construction)."""
    a = rng.normal(size=(dimension, dimension)) + 1j * rng.normal(size=(dimension, dimension))
    mat = a @ a.conj().T
    mat /= np.real(np.trace(mat))
    return DensityOperator(mat, FockCutoff(dimension - 1))


def random_pure(rng: np.random.Generator, dimension: int, support: int | None = None):
    """Random pure-state amplitude vector, optionally band-limited."""
    amps = rng.normal(size=dimension) + 1j * rng.normal(size=dimension)
    if support is not None:
        amps[support:] = 0.0
    return amps / np.linalg.norm(amps)
