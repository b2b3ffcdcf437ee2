import math

import numpy as np
import pytest

from lrtomo import (
    ConvergenceError,
    DensityMatrix,
    DomainError,
    LogLikelihood,
    TomographyDataset,
    ValidationError,
    gradient,
    log_likelihood,
    loglikelihood_ratio,
    mle,
)
from lrtomo.bloch import bloch_to_matrix, bloch_to_state

from conftest import random_bloch_states

FIG_COUNTS = {"sigma_x": (7, 13), "sigma_y": (9, 11), "sigma_z": (3, 17)}


def fig_freq_loglik():
    # Independent oracle: sum n ln(n/20) term by term.
    total = 0.0
    for plus, minus in FIG_COUNTS.values():
        total += plus * math.log(plus / 20) + minus * math.log(minus / 20)
    return total


def fig_mixed_ratio():
    # Closed form 2 sum n ln(2 f) for the maximally mixed state.
    total = 0.0
    for plus, minus in FIG_COUNTS.values():
        total += plus * math.log(2 * plus / 20) + minus * math.log(2 * minus / 20)
    return 2 * total


class TestLogLikelihood:
    def test_mixed_state_value(self, fig_dataset):
        val = log_likelihood(fig_dataset, DensityMatrix.maximally_mixed(2))
        assert abs(val - 60 * math.log(0.5)) <= 1e-12
        assert abs(val - (-41.5888)) <= 1e-4

    def test_certain_outcome_is_zero(self, sigma_z_povm):
        ds = TomographyDataset(2, (sigma_z_povm.with_counts((20, 0)),))
        assert log_likelihood(ds, DensityMatrix(np.diag([1.0, 0.0]))) == 0.0

    def test_empirical_state_value(self, fig_dataset):
        rho = bloch_to_state(np.array([-0.3, -0.1, -0.7]), 2)
        val = log_likelihood(fig_dataset, rho)
        assert abs(val - fig_freq_loglik()) <= 1e-10
        assert abs(val - (-35.1659)) <= 1e-4

    def test_zero_probability_gives_minus_inf(self, sigma_z_povm):
        ds = TomographyDataset(2, (sigma_z_povm.with_counts((20, 0)),))
        south = bloch_to_state(np.array([0.0, 0.0, -1.0]), 2)
        assert log_likelihood(ds, south) == -np.inf

    def test_dimension_mismatch(self, fig_dataset):
        with pytest.raises(ValidationError, match="shape"):
            log_likelihood(fig_dataset, DensityMatrix.maximally_mixed(3))

    def test_concavity_midpoints(self, fig_dataset):
        ll = LogLikelihood(fig_dataset)
        rng = np.random.default_rng(21)
        a = random_bloch_states(rng, 300)
        b = random_bloch_states(rng, 300)
        fa = ll.value_many(np.stack([bloch_to_matrix(v, 2) for v in a]))
        fb = ll.value_many(np.stack([bloch_to_matrix(v, 2) for v in b]))
        fm = ll.value_many(np.stack([bloch_to_matrix((x + y) / 2, 2) for x, y in zip(a, b)]))
        assert np.all(fm >= 0.5 * (fa + fb) - 1e-9)


class TestGradient:
    def test_balanced_counts_interior_stationary(self, sigma_z_povm):
        ds = TomographyDataset(2, (sigma_z_povm.with_counts((10, 10)),))
        g = gradient(ds, DensityMatrix.maximally_mixed(2))
        assert np.abs(g - 20 * np.eye(2)).max() <= 1e-10
        traceless = g - (np.trace(g) / 2) * np.eye(2)
        assert np.abs(traceless).max() <= 1e-10

    def test_linearity_in_counts(self, fig_dataset):
        doubled = TomographyDataset(
            2,
            tuple(
                s.__class__(s.name, s.effects, tuple(2 * c for c in s.counts))
                for s in fig_dataset.settings
            ),
        )
        rho = bloch_to_state(np.array([0.2, -0.1, 0.3]), 2)
        assert np.abs(gradient(doubled, rho) - 2 * gradient(fig_dataset, rho)).max() <= 1e-9

    def test_matches_finite_differences(self, fig_dataset):
        ll = LogLikelihood(fig_dataset)
        rng = np.random.default_rng(5)
        h = 1e-6
        for v in random_bloch_states(rng, 10, max_norm=0.8):
            rho = bloch_to_matrix(v, 2)
            g = ll.gradient(rho)
            for _ in range(20):
                d = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
                d = (d + d.conj().T) / 2
                d -= (np.trace(d) / 2) * np.eye(2)
                d /= np.linalg.norm(d)
                fd = (ll.value(rho + h * d) - ll.value(rho - h * d)) / (2 * h)
                analytic = np.real(np.vdot(g, d))
                assert abs(fd - analytic) <= 1e-5 * max(1.0, abs(analytic))

    def test_domain_error_on_zero_probability(self, sigma_z_povm):
        ds = TomographyDataset(2, (sigma_z_povm.with_counts((20, 0)),))
        south = bloch_to_state(np.array([0.0, 0.0, -1.0]), 2)
        with pytest.raises(DomainError):
            gradient(ds, south)


class TestMle:
    def test_bundled_dataset_interior_optimum(self, fig_dataset, fig_mle):
        assert fig_mle.converged
        from lrtomo.bloch import state_to_bloch

        v = state_to_bloch(fig_mle.rho_mle)
        assert np.abs(v - np.array([-0.3, -0.1, -0.7])).max() <= 1e-6
        assert abs(fig_mle.loglik_max - fig_freq_loglik()) <= 1e-9
        assert fig_mle.gradient_residual <= 5e-10

    def test_grid_refinement_oracle(self, fig_dataset, fig_mle):
        # Brute-force refinement over the Bloch ball confirms the optimum.
        ll = LogLikelihood(fig_dataset)
        center = np.zeros(3)
        half = 1.0
        best = None
        for _ in range(6):
            axes = [np.linspace(c - half, c + half, 9) for c in center]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
            grid = grid[np.linalg.norm(grid, axis=1) <= 1.0]
            vals = ll.value_many(
                np.eye(2) / 2 + 0.5 * np.einsum("bi,ijk->bjk", grid, _basis())
            )
            best = grid[np.argmax(vals)]
            center = best
            half /= 4.0
        assert np.abs(best - np.array([-0.3, -0.1, -0.7])).max() <= 1e-3
        assert fig_mle.loglik_max >= ll.value(bloch_to_matrix(best, 2)) - 1e-9

    def test_boundary_optimum(self, sigma_z_povm):
        ds = TomographyDataset(2, (sigma_z_povm.with_counts((20, 0)),))
        result = mle(ds)
        assert result.converged
        assert np.abs(result.rho_mle.matrix - np.diag([1.0, 0.0])).max() <= 1e-6
        assert abs(result.loglik_max) <= 1e-9

    def test_balanced_counts_give_mixed_state(self, paulis):
        ds = TomographyDataset(2, tuple(p.with_counts((10, 10)) for p in paulis))
        result = mle(ds)
        assert np.abs(result.rho_mle.matrix - np.eye(2) / 2).max() <= 1e-6

    def test_deterministic(self, fig_dataset):
        a = mle(fig_dataset)
        b = mle(fig_dataset)
        assert a.loglik_max == b.loglik_max
        assert np.array_equal(a.rho_mle.matrix, b.rho_mle.matrix)

    def test_non_convergence_reported(self, fig_dataset):
        result = mle(fig_dataset, max_iterations=2)
        assert not result.converged
        with pytest.raises(ConvergenceError):
            loglikelihood_ratio(fig_dataset, DensityMatrix.maximally_mixed(2), result)


class TestRatioStatistic:
    def test_zero_at_mle(self, fig_dataset, fig_mle):
        assert loglikelihood_ratio(fig_dataset, fig_mle.rho_mle, fig_mle) <= 1e-9

    def test_mixed_state_value(self, fig_dataset, fig_mle):
        lam = loglikelihood_ratio(fig_dataset, DensityMatrix.maximally_mixed(2), fig_mle)
        assert abs(lam - fig_mixed_ratio()) <= 1e-8
        assert abs(lam - 12.8459) <= 1e-3

    def test_infinite_for_impossible_state(self, sigma_z_povm):
        ds = TomographyDataset(2, (sigma_z_povm.with_counts((20, 0)),))
        south = bloch_to_state(np.array([0.0, 0.0, -1.0]), 2)
        assert loglikelihood_ratio(ds, south) == np.inf

    def test_nonnegative_on_random_states(self, fig_dataset, fig_mle):
        rng = np.random.default_rng(31)
        for v in random_bloch_states(rng, 500, max_norm=1.0):
            lam = loglikelihood_ratio(fig_dataset, bloch_to_state(v, 2), fig_mle)
            assert lam >= 0.0

    def test_convexity_midpoints(self, fig_dataset, fig_mle):
        ll = LogLikelihood(fig_dataset)
        rng = np.random.default_rng(41)
        a = random_bloch_states(rng, 300)
        b = random_bloch_states(rng, 300)

        def lam(vs):
            vals = ll.value_many(np.stack([bloch_to_matrix(v, 2) for v in vs]))
            return -2.0 * (vals - fig_mle.loglik_max)

        la, lb, lm = lam(a), lam(b), lam((a + b) / 2)
        assert np.all(lm <= 0.5 * (la + lb) + 1e-9)


def _basis():
    from lrtomo.bloch import gell_mann_basis

    return gell_mann_basis(2)
