import numpy as np
import pytest

from lrtomo import ValidationError, random_density_matrix
from lrtomo.bloch import (
    bloch_to_matrix,
    bloch_to_state,
    gell_mann_basis,
    matrix_to_bloch,
    state_to_bloch,
)

from conftest import SIGMA_X, SIGMA_Y, SIGMA_Z, random_bloch_states


def test_qubit_basis_is_pauli_ordered():
    basis = gell_mann_basis(2)
    assert np.allclose(basis[0], SIGMA_X)
    assert np.allclose(basis[1], SIGMA_Y)
    assert np.allclose(basis[2], SIGMA_Z)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_basis_orthonormality(dim):
    basis = gell_mann_basis(dim)
    assert basis.shape == (dim * dim - 1, dim, dim)
    for i, bi in enumerate(basis):
        assert np.abs(bi - bi.conj().T).max() <= 1e-14
        assert abs(np.trace(bi)) <= 1e-14
        for j, bj in enumerate(basis):
            expected = 2.0 if i == j else 0.0
            assert abs(np.trace(bi @ bj).real - expected) <= 1e-12


def test_zero_vector_is_maximally_mixed():
    assert np.allclose(bloch_to_matrix(np.zeros(3), 2), np.eye(2) / 2)


def test_north_pole_is_ground_state():
    assert np.allclose(bloch_to_matrix(np.array([0.0, 0.0, 1.0]), 2), np.diag([1.0, 0.0]))


def test_round_trip_vector_to_state():
    rng = np.random.default_rng(7)
    for v in random_bloch_states(rng, 200, max_norm=1.0):
        back = matrix_to_bloch(bloch_to_matrix(v, 2))
        assert np.abs(back - v).max() <= 1e-12


def test_round_trip_state_to_vector():
    rng = np.random.default_rng(8)
    for dim in (2, 3):
        for _ in range(50):
            rho = random_density_matrix(dim, rng)
            again = bloch_to_matrix(state_to_bloch(rho), dim)
            assert np.abs(again - rho.matrix).max() <= 1e-10


def test_ball_membership_matches_positivity():
    # For d = 2 the matrix is PSD exactly when the vector stays in the
    # unit ball; checked against an eigenvalue oracle on random draws.
    rng = np.random.default_rng(9)
    v = rng.normal(size=(10_000, 3))
    v *= (1.3 * rng.random((10_000, 1))) / np.linalg.norm(v, axis=1, keepdims=True)
    for vec in v:
        m = bloch_to_matrix(vec, 2)
        min_eig = np.linalg.eigvalsh(m)[0]
        if np.linalg.norm(vec) <= 1.0:
            assert min_eig >= -1e-12
        else:
            assert min_eig < 1e-12


def test_out_of_ball_vector_gives_unphysical_matrix():
    v = np.array([1.2, 0.0, 0.0])
    m = bloch_to_matrix(v, 2)
    assert np.linalg.eigvalsh(m)[0] < 0
    with pytest.raises(ValidationError):
        bloch_to_state(v, 2)


def test_wrong_length_rejected():
    with pytest.raises(ValidationError, match="length"):
        bloch_to_matrix(np.zeros(4), 2)
    with pytest.raises(ValidationError, match="length"):
        bloch_to_matrix(np.zeros(3), 3)
