import numpy as np
import pytest

from lrtomo.errors import ValidationError
from lrtomo.geometry import (
    ball_points,
    halton_sequence,
    minimum_enclosing_ball,
    minimum_volume_ellipsoid,
    sphere_directions,
)


class TestEllipsoid:
    def test_unit_axis_points_give_unit_ball(self):
        pts = np.vstack([np.eye(3), -np.eye(3)])
        center, shape = minimum_volume_ellipsoid(pts, epsilon=1e-7)
        assert np.abs(center).max() <= 1e-9
        assert np.abs(shape - np.eye(3)).max() <= 1e-6

    def test_axis_aligned_recovery(self):
        # Points on the surface of a known axis-aligned ellipsoid recover
        # its shape matrix.
        axes = np.array([2.0, 0.7, 1.3])
        pts = np.vstack([np.diag(axes), -np.diag(axes)])
        center, shape = minimum_volume_ellipsoid(pts, epsilon=1e-8)
        expected = np.diag(1.0 / axes**2)
        rel = np.abs(shape - expected).max() / np.abs(expected).max()
        assert rel <= 1e-3
        assert np.abs(center).max() <= 1e-6

    def test_containment_random_clouds(self):
        rng = np.random.default_rng(2)
        for n in (5, 20, 100):
            pts = rng.normal(size=(n, 3)) * np.array([3.0, 1.0, 0.2]) + 1.5
            center, shape = minimum_volume_ellipsoid(pts, epsilon=1e-6)
            resid = pts - center
            qf = np.einsum("ij,jk,ik->i", resid, shape, resid)
            assert qf.max() <= 1.0 + 1e-9
            # near-tightness: several points close to the boundary
            assert (qf >= 1.0 - 1e-3).sum() >= 4

    def test_rank_deficient_rejected(self):
        pts = np.zeros((5, 3))
        pts[:, 0] = np.arange(5.0)
        with pytest.raises(ValidationError):
            minimum_volume_ellipsoid(pts)

    def test_too_few_points_rejected(self):
        with pytest.raises(ValidationError, match="at least"):
            minimum_volume_ellipsoid(np.eye(3))


class TestBall:
    def test_antipodal_pair(self):
        center, radius = minimum_enclosing_ball(np.array([[1.0, 0, 0], [-1.0, 0, 0]]))
        assert np.abs(center).max() <= 1e-12
        assert abs(radius - 1.0) <= 1e-12

    def test_single_point(self):
        center, radius = minimum_enclosing_ball(np.array([[0.3, -0.2, 0.9]]))
        assert radius == 0.0
        assert np.allclose(center, [0.3, -0.2, 0.9])

    def test_duplicates(self):
        pts = np.array([[1.0, 1.0, 1.0]] * 7 + [[1.0, 1.0, 3.0]])
        center, radius = minimum_enclosing_ball(pts)
        assert abs(radius - 1.0) <= 1e-9
        assert np.allclose(center, [1.0, 1.0, 2.0], atol=1e-9)

    def test_random_sets_tight(self):
        rng = np.random.default_rng(5)
        for n in (4, 30, 400):
            pts = rng.normal(size=(n, 3))
            center, radius = minimum_enclosing_ball(pts)
            d = np.linalg.norm(pts - center, axis=1)
            assert d.max() <= radius + 1e-12
            # shrinking by 1e-6 must exclude at least one point
            assert (d > radius - 1e-6).any()

    def test_dimension_generality(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(size=(50, 8))
        center, radius = minimum_enclosing_ball(pts)
        d = np.linalg.norm(pts - center, axis=1)
        assert d.max() <= radius + 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            minimum_enclosing_ball(np.zeros((0, 3)))


class TestDirections:
    def test_sphere_directions_unit_and_deterministic(self):
        a = sphere_directions(64, 3)
        b = sphere_directions(64, 3)
        assert np.array_equal(a, b)
        assert np.abs(np.linalg.norm(a, axis=1) - 1.0).max() <= 1e-12

    def test_sphere_directions_spread(self):
        dirs = sphere_directions(128, 3)
        assert np.abs(dirs.mean(axis=0)).max() <= 0.15
        gram = dirs @ dirs.T
        np.fill_diagonal(gram, -1.0)
        assert gram.max() < 1.0 - 1e-6  # no duplicated direction

    def test_ball_points_inside(self):
        pts = ball_points(200, 3)
        assert pts.shape == (200, 3)
        assert np.linalg.norm(pts, axis=1).max() <= 1.0

    def test_halton_range(self):
        h = halton_sequence(100, 4)
        assert h.shape == (100, 4)
        assert h.min() >= 0.0 and h.max() < 1.0
