"""Unit tests for sector clustering."""

import numpy as np
import pytest

from camix.clustering import distortion, fit_sectors, point_to_ray_distance, update_ray
from camix.errors import DegenerateSectorError, InputError


def _bundles(rng, directions, per_bundle=40, spread=0.02):
    """Points scattered tightly around the given directions."""
    columns = []
    for d in directions:
        d = np.asarray(d, dtype=float) / np.linalg.norm(d)
        noise = spread * rng.normal(size=(d.size, per_bundle))
        scale = rng.uniform(0.5, 2.0, size=per_bundle)
        columns.append(np.abs(d[:, None] * scale + noise))
    return np.hstack(columns)


class TestUpdateRay:
    """Test the power-iteration ray update."""

    def test_matches_dense_eigensolver(self, rng):
        """Test agreement with numpy's symmetric eigensolver."""
        for _ in range(20):
            P = np.abs(rng.normal(size=(4, 30)))
            ray = update_ray(P)
            values, vectors = np.linalg.eigh(P @ P.T)
            expected = vectors[:, -1] * np.sign(vectors[:, -1].sum())
            cos = np.clip(abs(np.dot(ray, expected)), -1.0, 1.0)
            assert np.arccos(cos) < 1e-6
            assert np.linalg.norm(ray) == pytest.approx(1.0)

    def test_single_point(self):
        """Test that a single point gives its own direction."""
        ray = update_ray(np.array([3.0, 4.0]))
        np.testing.assert_allclose(ray, [0.6, 0.8])

    def test_sign_follows_points(self):
        """Test that the ray points towards the data, not away from it."""
        ray = update_ray(np.array([[1.0, 2.0], [1.0, 1.5]]))
        assert np.all(ray > 0)

    def test_all_zero_sector(self):
        """Test that a sector of zero vectors is degenerate."""
        with pytest.raises(DegenerateSectorError):
            update_ray(np.zeros((3, 4)))


class TestDistortion:
    """Test point-to-ray distance and total distortion."""

    def test_point_to_ray_distance(self):
        """Test the distance to a coordinate axis."""
        assert point_to_ray_distance(np.array([3.0, 4.0]), np.array([1.0, 0.0])) == pytest.approx(4.0)

    def test_distortion_sums_squared_distances(self):
        """Test the total over an explicit assignment."""
        X = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        rays = np.eye(2)
        assert distortion(X, rays, np.array([0, 1, 0])) == pytest.approx(1.0)


class TestFitSectors:
    """Test the restarted sector clustering."""

    def test_recovers_bundle_directions(self, rng):
        """Test that each tight bundle gets its own ray."""
        directions = [[1.0, 0.1, 0.1], [0.1, 1.0, 0.1], [0.1, 0.1, 1.0]]
        X = _bundles(rng, directions)
        model = fit_sectors(X, 3, restarts=5, seed=1)
        for d in directions:
            d = np.asarray(d) / np.linalg.norm(d)
            assert np.max(model.rays.T @ d) > np.cos(0.05)
        assert model.sector_sizes.sum() == X.shape[1]
        assert model.n_sectors == 3

    def test_distortion_never_increases(self, rng):
        """Test monotone descent of the distortion within a restart."""
        for seed in range(100):
            X = np.abs(rng.normal(size=(3, 60)))
            model = fit_sectors(X, 6, restarts=1, seed=seed, max_iter=50)
            history = np.array(model.distortion_history)
            assert np.all(np.diff(history) <= 1e-9 * history[0])

    def test_reported_distortion_matches_recomputation(self, rng):
        """Test that the stored distortion equals an independent recomputation."""
        X = np.abs(rng.normal(size=(3, 80)))
        model = fit_sectors(X, 5, restarts=3, seed=2)
        assert model.distortion == pytest.approx(distortion(X, model.rays, model.assignment))

    def test_seed_reproducibility(self, rng):
        """Test that identical seeds give identical models."""
        X = np.abs(rng.normal(size=(3, 80)))
        a = fit_sectors(X, 5, restarts=3, seed=7)
        b = fit_sectors(X, 5, restarts=3, seed=7)
        np.testing.assert_array_equal(a.rays, b.rays)
        np.testing.assert_array_equal(a.assignment, b.assignment)

    def test_parallel_matches_serial(self, rng):
        """Test that the worker count does not change the result."""
        X = np.abs(rng.normal(size=(3, 80)))
        serial = fit_sectors(X, 5, restarts=4, seed=3, n_jobs=1)
        parallel = fit_sectors(X, 5, restarts=4, seed=3, n_jobs=2)
        np.testing.assert_array_equal(serial.rays, parallel.rays)

    def test_rays_are_unit_norm(self, rng):
        """Test that every ray has unit norm."""
        model = fit_sectors(np.abs(rng.normal(size=(4, 50))), 6, restarts=2)
        np.testing.assert_allclose(np.linalg.norm(model.rays, axis=0), 1.0)

    def test_more_sectors_than_points(self):
        """Test that J > N is rejected."""
        with pytest.raises(InputError):
            fit_sectors(np.ones((2, 3)), 4)

    def test_zero_points_rejected(self):
        """Test that all-zero points must be removed first."""
        X = np.array([[1.0, 0.0, 2.0], [1.0, 0.0, 1.0]])
        with pytest.raises(InputError):
            fit_sectors(X, 2)
