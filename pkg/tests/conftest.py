import math

import numpy as np
import pytest

from qpdl.modules.kam import partition_spectrum, schedule, schedule_for
from qpdl.modules.potential import cosine, zero
from qpdl.modules.spectral_transform import build_spectral_grid
from qpdl.modules.torus_freq import Frequency


@pytest.fixture(autouse=True)
def _two_threads(monkeypatch):
    monkeypatch.setenv("QPDL_THREADS", "2")


@pytest.fixture
def golden():
    return Frequency()


@pytest.fixture
def free():
    return zero(1)


@pytest.fixture
def mathieu():
    """2ε cos θ with ε = 0.01."""
    return cosine(0.01)


@pytest.fixture
def small_cosine():
    """2ε cos θ with ε = 1e-3."""
    return cosine(1e-3)


@pytest.fixture
def sched_small():
    return schedule(1e-3, 2, 20)


def free_energy_grid(n: int) -> np.ndarray:
    """Energies whose free rotation numbers are the midpoints π(i + 1/2)/n, plus one point
    outside [-2, 2] on each side."""
    inner = -2.0 * np.cos(math.pi * (np.arange(n) + 0.5) / n)
    return np.concatenate([[-2.5], inner, [2.5]])


@pytest.fixture(scope="session")
def free_spectral_grid():
    V = zero(1)
    return build_spectral_grid(V, Frequency(), 0.0, free_energy_grid(300), 20,
                               schedule_for(V, 1), 1, n_rotation=100_000)


@pytest.fixture(scope="session")
def free_partition():
    V = zero(1)
    return partition_spectrum(V, Frequency(), schedule_for(V, 1), 1, free_energy_grid(300))


@pytest.fixture(scope="session")
def cosine_sched():
    return schedule_for(cosine(1e-3), 2)


@pytest.fixture(scope="session")
def cosine_spectral_grid(cosine_sched):
    """ε₀ = 1e-3, J = 2, 2000 energies on [-2.5, 2.5], window N = 40."""
    return build_spectral_grid(cosine(1e-3), Frequency(), 0.0, np.linspace(-2.5, 2.5, 2000), 40,
                               cosine_sched, 2, n_rotation=100_000)


@pytest.fixture(scope="session")
def cosine_partition(cosine_sched, cosine_spectral_grid):
    return partition_spectrum(cosine(1e-3), Frequency(), cosine_sched, 2,
                              cosine_spectral_grid.energies)
