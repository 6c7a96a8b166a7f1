from functools import lru_cache

import numpy as np
import pytest

from greenlab import Grid, build_dirac, deficiency_modes, extend_self_adjoint


@lru_cache(maxsize=None)
def dirac(n_points: int, length: float = 2.0, potential=None):
    """Cached ``(system, extension)`` pair; ``potential`` is a hashable scalar or None."""
    sys = build_dirac(Grid.uniform(n_points, length), potential)
    return sys, extend_self_adjoint(sys)


@lru_cache(maxsize=None)
def modes(n_points: int, length: float = 2.0):
    return deficiency_modes(dirac(n_points, length)[0])


def random_state(sys, rng):
    return rng.normal(size=sys.state_dim) + 1j * rng.normal(size=sys.state_dim)


def domain_state(sys, rng):
    y = random_state(sys, rng)
    y[0] = y[sys.n_points - 1] = 0.0
    return y


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sys64():
    return dirac(64)


@pytest.fixture(scope="session")
def sys256():
    return dirac(256)
