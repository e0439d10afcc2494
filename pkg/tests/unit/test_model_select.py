"""Unit tests for stability-based source-number selection."""

import itertools

import numpy as np
import pytest

from camix.config import RunConfig
from camix.errors import InputError
from camix.model_select import (
    angle_matrix,
    fit_edges,
    min_avg_angle,
    nmi_from_terms,
    random_split,
    stability_select,
)
from camix.preprocess import preprocess
from tests.fixtures.synthetic import wgp_dataset


class TestMinAvgAngle:
    """Test the optimal column pairing."""

    def test_identical_matrices(self):
        """Test that a matrix is at zero distance from itself."""
        U = np.abs(np.random.default_rng(0).normal(size=(3, 4)))
        value, permutation = min_avg_angle(U, U)
        assert value == 0.0
        np.testing.assert_array_equal(permutation, np.arange(4))

    def test_permutation_recovered(self, rng):
        """Test that a column permutation is undone."""
        U = np.abs(rng.normal(size=(4, 5)))
        order = rng.permutation(5)
        value, permutation = min_avg_angle(U, U[:, order])
        assert value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_array_equal(order[permutation], np.arange(5))

    def test_matches_permutation_enumeration(self, rng):
        """Test the Hungarian result against all K! pairings."""
        for _ in range(30):
            k = int(rng.integers(1, 7))
            U = rng.normal(size=(3, k))
            W = rng.normal(size=(3, k))
            cost = angle_matrix(U, W)
            brute = min(
                np.mean([cost[i, p[i]] for i in range(k)])
                for p in itertools.permutations(range(k))
            )
            assert min_avg_angle(U, W)[0] == pytest.approx(brute, abs=1e-12)

    def test_scale_invariance(self, rng):
        """Test that positive column scaling does not matter."""
        U = np.abs(rng.normal(size=(3, 3)))
        W = np.abs(rng.normal(size=(3, 3)))
        scaled = W * rng.uniform(0.1, 10.0, size=3)
        assert min_avg_angle(U, W)[0] == pytest.approx(min_avg_angle(U, scaled)[0])

    def test_no_sampled_pairing_is_better(self, rng):
        """Test the Hungarian pairing against random pairings where K! is too many to list."""
        for _ in range(10):
            U = rng.normal(size=(5, 10))
            W = rng.normal(size=(5, 10))
            cost = angle_matrix(U, W)
            value, permutation = min_avg_angle(U, W)

            assert value == pytest.approx(cost[np.arange(10), permutation].mean())
            for _ in range(500):
                sampled = rng.permutation(10)
                assert value <= cost[np.arange(10), sampled].mean() + 1e-12

    def test_shape_mismatch(self):
        """Test that both matrices need the same shape."""
        with pytest.raises(InputError):
            min_avg_angle(np.eye(3), np.eye(3)[:, :2])


class TestNMI:
    """Test the normalized model instability."""

    def test_ratio(self):
        """Test NMI = 2 sum(d) / sum(random terms)."""
        angles = np.array([[0.1, 0.2], [0.1, 0.4]])
        random = np.array([[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]])
        np.testing.assert_allclose(nmi_from_terms(angles, random), [0.2, 0.6])

    def test_zero_denominator(self):
        """Test the 0/0 and x/0 conventions."""
        angles = np.array([[0.0, 0.1]])
        random = np.zeros((1, 2, 2))
        nmi = nmi_from_terms(angles, random)
        assert nmi[0] == 0.0
        assert np.isinf(nmi[1])


class TestRandomSplit:
    """Test the two-fold partition."""

    def test_partition(self, rng):
        """Test that the folds are disjoint, sorted and cover every index."""
        a, b = random_split(11, rng)
        assert len(a) == 6 and len(b) == 5
        assert np.all(np.diff(a) > 0) and np.all(np.diff(b) > 0)
        np.testing.assert_array_equal(np.sort(np.concatenate([a, b])), np.arange(11))


class TestStabilitySelect:
    """Test the full stability analysis."""

    @pytest.fixture
    def data(self):
        """Preprocessed noise-free exact-determined data with K = 4."""
        X = wgp_dataset("exact", n=400, seed=11).X
        return preprocess(X, 0.0)[0]

    def test_profile_shape(self, data):
        """Test the profile layout."""
        config = RunConfig(sectors=10, restarts=2)
        profile = stability_select(data, 5, 3, config=config, seed=1)
        assert profile.k_range == [2, 3, 4, 5]
        assert len(profile.nmi) == 4
        assert len(profile.per_trial_angles) == 3
        assert np.array(profile.per_trial_random_angles).shape == (3, 4, 2)
        assert profile.recommended_k in profile.k_range

    def test_identical_folds_give_zero_nmi(self, data):
        """Test that a splitter returning the same fold twice yields NMI 0."""

        def same_fold(n, rng):
            everything = np.arange(n)
            return everything, everything

        config = RunConfig(sectors=10, restarts=2)
        profile = stability_select(data, 4, 2, config=config, seed=0, splitter=same_fold)
        np.testing.assert_allclose(profile.nmi, 0.0)
        assert profile.recommended_k == 2

    def test_seed_reproducibility(self, data):
        """Test that identical seeds give identical profiles."""
        config = RunConfig(sectors=10, restarts=2)
        a = stability_select(data, 4, 2, config=config, seed=5)
        b = stability_select(data, 4, 2, config=config, seed=5, n_jobs=2)
        assert a.nmi == b.nmi

    def test_fold_smaller_than_sectors(self):
        """Test that folds must hold at least J points."""
        X = np.abs(np.random.default_rng(0).normal(size=(3, 30)))
        with pytest.raises(InputError):
            stability_select(X, 3, 1, config=RunConfig(sectors=20, restarts=1))

    def test_k_max_above_sectors(self, data):
        """Test that K candidates cannot exceed J."""
        with pytest.raises(InputError):
            stability_select(data, 12, 1, config=RunConfig(sectors=10))


class TestFitEdges:
    """Test clustering followed by edge detection."""

    def test_edge_indices_refer_to_model_rays(self):
        """Test that edge indices point into the sector model."""
        X = preprocess(wgp_dataset("exact", n=300, seed=2).X, 0.0)[0]
        model, edges, distinct = fit_edges(X, RunConfig(sectors=12, restarts=2), seed=0)
        assert set(edges.ray_indices) <= set(distinct)
        assert max(distinct) < model.n_sectors
        assert edges.count >= 1
