import numpy as np
import pytest

from lrtomo import bundled_qubit_dataset, mle, pauli_settings

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@pytest.fixture(scope="session")
def fig_dataset():
    return bundled_qubit_dataset()


@pytest.fixture(scope="session")
def fig_mle(fig_dataset):
    return mle(fig_dataset)


@pytest.fixture(scope="session")
def paulis():
    return pauli_settings()


@pytest.fixture(scope="session")
def sigma_z_povm(paulis):
    return next(p for p in paulis if p.name == "sigma_z")


def random_bloch_states(rng, n, max_norm=0.95):
    """Random qubit Bloch vectors with norm at most max_norm."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = max_norm * rng.random(n) ** (1.0 / 3.0)
    return v * r[:, None]
