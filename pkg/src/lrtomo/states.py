"""States, measurements and datasets: the data model for tomography.

A quantum state is a density matrix (Hermitian, unit-trace, positive
semidefinite).  A measurement setting is a POVM -- a list of effect
matrices summing to the identity -- together with the observed outcome
counts.  A dataset is a collection of settings on a common Hilbert-space
dimension.  All types are immutable after construction and validated
eagerly, so that downstream numerics can assume well-formed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Tolerances for the structural invariants.
HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-10
PSD_EIG_FLOOR = -1e-10
COMPLETENESS_ATOL = 1e-8
PROB_SUM_ATOL = 1e-8


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


def _as_square_matrix(value, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{what} must be a square matrix, got shape {arr.shape}")
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise ValidationError(f"{what} contains non-finite entries")
    return arr


def _check_hermitian(arr: np.ndarray, what: str) -> None:
    dev = float(np.max(np.abs(arr - arr.conj().T))) if arr.size else 0.0
    if dev > HERMITIAN_ATOL:
        raise ValidationError(f"{what} is not Hermitian (max deviation {dev:.3e})")


def _check_psd(arr: np.ndarray, what: str) -> None:
    wmin = float(np.linalg.eigvalsh(arr)[0])
    if wmin < PSD_EIG_FLOOR:
        raise ValidationError(
            f"{what} is not positive semidefinite (min eigenvalue {wmin:.3e})"
        )


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A d x d Hermitian, PSD, unit-trace matrix describing a quantum state."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = _as_square_matrix(self.matrix, "density matrix")
        _check_hermitian(arr, "density matrix")
        tr = complex(np.trace(arr))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValidationError(f"density matrix trace is {tr}, expected 1")
        _check_psd(arr, "density matrix")
        object.__setattr__(self, "matrix", _freeze(arr))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)


@dataclass(frozen=True, eq=False)
class Effect:
    """A POVM element: Hermitian and positive semidefinite."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = _as_square_matrix(self.matrix, "effect")
        _check_hermitian(arr, "effect")
        _check_psd(arr, "effect")
        object.__setattr__(self, "matrix", _freeze(arr))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _check_completeness(effects: tuple[Effect, ...], what: str) -> None:
    if not effects:
        raise ValidationError(f"{what} has no effects")
    dim = effects[0].dim
    total = np.zeros((dim, dim), dtype=complex)
    for e in effects:
        if e.dim != dim:
            raise ValidationError(f"{what} mixes effect dimensions {dim} and {e.dim}")
        total = total + e.matrix
    dev = float(np.max(np.abs(total - np.eye(dim))))
    if dev > COMPLETENESS_ATOL:
        raise ValidationError(
            f"{what} effects do not sum to the identity (max deviation {dev:.3e})"
        )


@dataclass(frozen=True, eq=False)
class Povm:
    """A named POVM used as a measurement-setting template (no counts yet)."""

    name: str
    effects: tuple[Effect, ...]

    def __post_init__(self):
        object.__setattr__(self, "effects", tuple(self.effects))
        _check_completeness(self.effects, f"POVM {self.name!r}")

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    def with_counts(self, counts) -> "MeasurementSetting":
        return MeasurementSetting(self.name, self.effects, tuple(counts))


@dataclass(frozen=True, eq=False)
class MeasurementSetting:
    """A POVM plus the observed outcome counts for that setting."""

    name: str
    effects: tuple[Effect, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "effects", tuple(self.effects))
        _check_completeness(self.effects, f"setting {self.name!r}")
        counts = []
        for c in self.counts:
            ci = int(c)
            if ci != c or ci < 0:
                raise ValidationError(
                    f"setting {self.name!r} counts must be nonnegative integers, got {c!r}"
                )
            counts.append(ci)
        if len(counts) != len(self.effects):
            raise ValidationError(
                f"setting {self.name!r} has {len(counts)} counts for "
                f"{len(self.effects)} effects"
            )
        object.__setattr__(self, "counts", tuple(counts))

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def total_shots(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True, eq=False)
class TomographyDataset:
    """All observed data: a dimension and a list of measurement settings."""

    dim: int
    settings: tuple[MeasurementSetting, ...]

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValidationError(f"dimension must be positive, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "settings", tuple(self.settings))
        for s in self.settings:
            if s.dim != self.dim:
                raise ValidationError(
                    f"setting {s.name!r} has dimension {s.dim}, dataset has {self.dim}"
                )

    @property
    def total_copies(self) -> int:
        return sum(s.total_shots for s in self.settings)


def born_probabilities(rho: DensityMatrix, setting) -> np.ndarray:
    """Outcome probabilities p_k = Tr(E_k rho), clamped to [0, 1].

    ``setting`` may be a MeasurementSetting or a Povm.  Raises
    ValidationError on a dimension mismatch.
    """
    if rho.dim != setting.effects[0].dim:
        raise ValidationError(
            f"state dimension {rho.dim} does not match setting dimension "
            f"{setting.effects[0].dim}"
        )
    p = np.array(
        [float(np.real(np.trace(e.matrix @ rho.matrix))) for e in setting.effects]
    )
    if p.min() < -1e-10 or p.max() > 1 + 1e-10:
        raise ValidationError(f"Born probabilities out of range: {p}")
    return np.clip(p, 0.0, 1.0)


def pauli_settings() -> list[Povm]:
    """The three single-qubit Pauli measurements as two-outcome POVMs."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    eye = np.eye(2, dtype=complex)
    povms = []
    for name, sigma in (("sigma_x", sx), ("sigma_y", sy), ("sigma_z", sz)):
        plus = Effect((eye + sigma) / 2)
        minus = Effect((eye - sigma) / 2)
        povms.append(Povm(name, (plus, minus)))
    return povms


def _setting_template(setting) -> tuple[str, tuple[Effect, ...]]:
    return setting.name, tuple(setting.effects)


def simulate_dataset(rho: DensityMatrix, settings, seed: int) -> TomographyDataset:
    """Draw multinomial counts for each (POVM, shots) pair.

    ``settings`` is a sequence of ``(povm_or_setting, shots)`` pairs.  The
    RNG is the counter-based Philox generator; each setting consumes its
    own child stream of ``seed``, so results are reproducible bit-for-bit
    and independent of evaluation order.
    """
    streams = np.random.SeedSequence(seed).spawn(len(tuple(settings)))
    out = []
    for (template, shots), stream in zip(settings, streams):
        name, effects = _setting_template(template)
        shots = int(shots)
        if shots < 0:
            raise ValidationError(f"shots must be nonnegative, got {shots}")
        p = born_probabilities(rho, template)
        total = p.sum()
        if total <= 0:
            raise ValidationError(f"setting {name!r} has zero total probability")
        rng = np.random.Generator(np.random.Philox(stream))
        counts = rng.multinomial(shots, p / total)
        out.append(MeasurementSetting(name, effects, tuple(int(c) for c in counts)))
    return TomographyDataset(rho.dim, tuple(out))


def random_density_matrix(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """A Hilbert-Schmidt-distributed random state (Ginibre construction)."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    m = m / np.trace(m).real
    m = (m + m.conj().T) / 2
    return DensityMatrix(m)
