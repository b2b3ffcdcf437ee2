import numpy as np
import pytest

from lrtomo import (
    DensityMatrix,
    Effect,
    MeasurementSetting,
    TomographyDataset,
    ValidationError,
    born_probabilities,
    random_density_matrix,
    simulate_dataset,
)
from lrtomo.bloch import bloch_to_state

from conftest import random_bloch_states


class TestInvariants:
    def test_non_hermitian_rejected(self):
        with pytest.raises(ValidationError, match="Hermitian"):
            DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))

    def test_bad_trace_rejected(self):
        with pytest.raises(ValidationError, match="trace"):
            DensityMatrix(np.eye(2))

    def test_non_psd_rejected(self):
        with pytest.raises(ValidationError, match="positive semidefinite"):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError, match="finite"):
            Effect(np.array([[np.nan, 0], [0, 1.0]]))

    def test_counts_length_mismatch(self, sigma_z_povm):
        with pytest.raises(ValidationError, match="counts"):
            MeasurementSetting("z", sigma_z_povm.effects, (1, 2, 3))

    def test_negative_counts(self, sigma_z_povm):
        with pytest.raises(ValidationError, match="nonnegative"):
            MeasurementSetting("z", sigma_z_povm.effects, (-1, 2))

    def test_incomplete_povm(self):
        e = Effect(np.diag([0.4, 0.4]))
        with pytest.raises(ValidationError, match="identity"):
            MeasurementSetting("bad", (e, e), (1, 1))

    def test_dataset_dimension_mismatch(self, sigma_z_povm):
        setting = sigma_z_povm.with_counts((1, 1))
        with pytest.raises(ValidationError, match="dimension"):
            TomographyDataset(3, (setting,))

    def test_matrices_frozen(self):
        rho = DensityMatrix.maximally_mixed(2)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0


class TestBornRule:
    def test_maximally_mixed(self, sigma_z_povm):
        p = born_probabilities(DensityMatrix.maximally_mixed(2), sigma_z_povm)
        assert np.allclose(p, [0.5, 0.5], atol=1e-12)

    def test_eigenstate(self, sigma_z_povm):
        p = born_probabilities(DensityMatrix(np.diag([1.0, 0.0])), sigma_z_povm)
        assert np.allclose(p, [1.0, 0.0], atol=1e-12)

    def test_bundled_dataset_frequencies(self, sigma_z_povm):
        # Bloch z = -0.7 gives p = ((1+z)/2, (1-z)/2) = (0.15, 0.85),
        # matching the bundled counts 3/17 out of 20.
        rho = bloch_to_state(np.array([-0.3, -0.1, -0.7]), 2)
        p = born_probabilities(rho, sigma_z_povm)
        assert np.allclose(p, [0.15, 0.85], atol=1e-12)

    def test_dimension_mismatch(self, sigma_z_povm):
        with pytest.raises(ValidationError, match="dimension"):
            born_probabilities(DensityMatrix.maximally_mixed(3), sigma_z_povm)

    def test_affine_in_state(self, paulis):
        rng = np.random.default_rng(11)
        for _ in range(100):
            v1, v2 = random_bloch_states(rng, 2)
            lam = rng.random()
            rho1 = bloch_to_state(v1, 2)
            rho2 = bloch_to_state(v2, 2)
            mix = DensityMatrix(lam * rho1.matrix + (1 - lam) * rho2.matrix)
            for povm in paulis:
                p_mix = born_probabilities(mix, povm)
                p_lin = lam * born_probabilities(rho1, povm) + (1 - lam) * born_probabilities(rho2, povm)
                assert np.abs(p_mix - p_lin).max() <= 1e-10


class TestPauliSettings:
    def test_sigma_z_projectors(self, sigma_z_povm):
        assert np.allclose(sigma_z_povm.effects[0].matrix, np.diag([1.0, 0.0]))
        assert np.allclose(sigma_z_povm.effects[1].matrix, np.diag([0.0, 1.0]))

    def test_completeness(self, paulis):
        for povm in paulis:
            total = sum(e.matrix for e in povm.effects)
            assert np.abs(total - np.eye(2)).max() <= 1e-12

    def test_rank_one_projectors(self, paulis):
        for povm in paulis:
            for e in povm.effects:
                w = np.linalg.eigvalsh(e.matrix)
                assert np.allclose(sorted(w), [0.0, 1.0], atol=1e-12)

    def test_x_eigenstate(self, paulis):
        povm = next(p for p in paulis if p.name == "sigma_x")
        rho = bloch_to_state(np.array([1.0, 0.0, 0.0]), 2)
        assert abs(np.trace(povm.effects[0].matrix @ rho.matrix).real - 1.0) <= 1e-12


class TestSimulation:
    def test_deterministic_outcome(self, sigma_z_povm):
        rho = DensityMatrix(np.diag([1.0, 0.0]))
        ds = simulate_dataset(rho, [(sigma_z_povm, 20)], seed=5)
        assert ds.settings[0].counts == (20, 0)

    def test_seed_reproducibility(self, paulis):
        rho = DensityMatrix.maximally_mixed(2)
        pairs = [(p, 20) for p in paulis]
        a = simulate_dataset(rho, pairs, seed=42)
        b = simulate_dataset(rho, pairs, seed=42)
        assert all(x.counts == y.counts for x, y in zip(a.settings, b.settings))
        c = simulate_dataset(rho, pairs, seed=43)
        assert any(x.counts != y.counts for x, y in zip(a.settings, c.settings))

    def test_counts_sum_to_shots(self, paulis):
        rho = DensityMatrix.maximally_mixed(2)
        ds = simulate_dataset(rho, [(p, 17) for p in paulis], seed=0)
        assert all(s.total_shots == 17 for s in ds.settings)
        assert ds.total_copies == 51

    def test_binomial_concentration(self, sigma_z_povm):
        rho = DensityMatrix.maximally_mixed(2)
        for seed in range(100):
            ds = simulate_dataset(rho, [(sigma_z_povm, 100_000)], seed=seed)
            freq = ds.settings[0].counts[0] / 100_000
            assert abs(freq - 0.5) < 0.005

    def test_negative_shots_rejected(self, sigma_z_povm):
        with pytest.raises(ValidationError, match="shots"):
            simulate_dataset(DensityMatrix.maximally_mixed(2), [(sigma_z_povm, -1)], seed=0)


def test_random_density_matrix_validity():
    rng = np.random.default_rng(0)
    for dim in (2, 3, 4):
        for _ in range(20):
            rho = random_density_matrix(dim, rng)
            assert rho.dim == dim
