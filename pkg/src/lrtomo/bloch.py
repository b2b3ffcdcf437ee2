"""Generalized Bloch coordinates for d-dimensional states.

States are parametrized over the generalized Gell-Mann basis, normalized
so that Tr(B_i B_j) = 2 delta_ij and ordered symmetric -> antisymmetric ->
diagonal.  For d = 2 this reproduces the Pauli basis (x, y, z) and the
familiar Bloch ball: a vector v maps to a physical state iff |v| <= 1.
For d > 2 the physical set is a proper subset of the unit-radius ball, so
``bloch_to_matrix`` can produce non-PSD Hermitian matrices; callers that
need physicality go through ``bloch_to_state`` which validates.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .states import DensityMatrix


@lru_cache(maxsize=None)
def gell_mann_basis(dim: int) -> np.ndarray:
    """Orthogonal traceless Hermitian basis, shape (dim**2 - 1, dim, dim)."""
    if dim < 2:
        raise ValidationError(f"basis requires dim >= 2, got {dim}")
    mats = []
    # Symmetric off-diagonal elements.
    for j in range(dim):
        for k in range(j + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[j, k] = m[k, j] = 1.0
            mats.append(m)
    # Antisymmetric off-diagonal elements.
    for j in range(dim):
        for k in range(j + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[j, k] = -1j
            m[k, j] = 1j
            mats.append(m)
    # Diagonal elements, normalized to Tr(B^2) = 2.
    for level in range(1, dim):
        diag = np.zeros(dim)
        diag[:level] = 1.0
        diag[level] = -level
        diag = diag * np.sqrt(2.0 / (level * (level + 1)))
        mats.append(np.diag(diag).astype(complex))
    basis = np.stack(mats)
    basis.setflags(write=False)
    return basis


def _check_length(v: np.ndarray, dim: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    expected = dim * dim - 1
    if v.shape != (expected,):
        raise ValidationError(
            f"Bloch vector for dim {dim} must have length {expected}, got shape {v.shape}"
        )
    return v


def bloch_to_matrix(v, dim: int = 2) -> np.ndarray:
    """Hermitian unit-trace matrix I/d + (1/2) sum_i v_i B_i.

    Not guaranteed PSD: out-of-ball vectors give unphysical matrices.
    """
    v = _check_length(v, dim)
    basis = gell_mann_basis(dim)
    m = np.eye(dim, dtype=complex) / dim + 0.5 * np.tensordot(v, basis, axes=(0, 0))
    return (m + m.conj().T) / 2


def bloch_to_state(v, dim: int = 2) -> DensityMatrix:
    """Like ``bloch_to_matrix`` but validated; raises if unphysical."""
    return DensityMatrix(bloch_to_matrix(v, dim))


def matrix_to_bloch(matrix: np.ndarray) -> np.ndarray:
    """Coordinates v_i = Tr(rho B_i) of a Hermitian matrix."""
    matrix = np.asarray(matrix, dtype=complex)
    dim = matrix.shape[0]
    basis = gell_mann_basis(dim)
    return np.real(np.einsum("kij,ji->k", basis, matrix))


def state_to_bloch(rho: DensityMatrix) -> np.ndarray:
    return matrix_to_bloch(rho.matrix)
