"""Source-number selection by stability analysis.

Each trial splits the preprocessed data into two folds, estimates the
mixing matrix on both for every candidate K and measures how far the two
estimates are apart. The disagreement is normalized by the disagreement
with estimates made of randomly chosen sector rays (normalized model
instability, NMI); the K with the smallest NMI is recommended.
"""

import logging
from typing import Callable, Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linear_sum_assignment

from .cam_core import detect_edges, select_k_edges
from .clustering import fit_sectors
from .config import RunConfig
from .errors import InputError
from .geometry import dedup_direction_indices, unit_columns
from .models import EdgeSet, SectorModel, StabilityProfile
from .rng import child_rng, derive_seed

logger = logging.getLogger(__name__)

Splitter = Callable[[int, np.random.Generator], tuple[np.ndarray, np.ndarray]]


def angle_matrix(U: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Matrix of angles between the columns of U (rows) and W (columns)."""
    u = unit_columns(U).T[:, None, :]
    w = unit_columns(W).T[None, :, :]
    return 2.0 * np.arctan2(
        np.linalg.norm(u - w, axis=2), np.linalg.norm(u + w, axis=2)
    )


def min_avg_angle(U: np.ndarray, W: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimum over column pairings of the average angle between U and W.

    Returns:
        tuple[float, np.ndarray]: the average angle (radians) and the
        permutation phi with column k of U paired to column phi[k] of W.
    """
    U = np.asarray(U, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if U.ndim != 2 or U.shape != W.shape:
        raise InputError(f"shape mismatch: {U.shape} vs {W.shape}")
    if U.shape[1] < 1:
        raise InputError("matrices need at least one column")

    cost = angle_matrix(U, W)
    rows, cols = linear_sum_assignment(cost)
    permutation = np.empty(U.shape[1], dtype=int)
    permutation[rows] = cols
    return float(cost[rows, cols].mean()), permutation


def nmi_from_terms(
    per_trial_angles: np.ndarray, per_trial_random_angles: np.ndarray
) -> np.ndarray:
    """NMI per K from per-trial fold angles (L x K) and random angles (L x K x 2)."""
    numerator = 2.0 * np.asarray(per_trial_angles, dtype=np.float64).sum(axis=0)
    denominator = np.asarray(per_trial_random_angles, dtype=np.float64).sum(axis=(0, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        nmi = numerator / denominator
    nmi = np.where(denominator > 0, nmi, np.where(numerator > 0, np.inf, 0.0))
    return nmi


def random_split(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform two-fold split; the first fold gets the extra point when n is odd."""
    order = rng.permutation(n)
    half = (n + 1) // 2
    return np.sort(order[:half]), np.sort(order[half:])


def fit_edges(
    X: np.ndarray, config: RunConfig, seed: int, n_jobs: Optional[int] = 1
) -> tuple[SectorModel, EdgeSet, list[int]]:
    """Cluster X into sectors and detect the lateral edges among the distinct rays.

    Returns the sector model, the edge set (indices into the model rays)
    and the indices of the distinct rays.
    """
    model = fit_sectors(
        X,
        config.sectors,
        config.restarts,
        seed=seed,
        max_iter=config.max_iter,
        n_jobs=n_jobs,
    )
    distinct = dedup_direction_indices(model.rays, config.dedup_tol).tolist()
    local = detect_edges(model.rays[:, distinct], config.tau)
    edges = EdgeSet(
        ray_indices=[distinct[i] for i in local.ray_indices],
        tau=local.tau,
        survivor_angles=local.survivor_angles,
        removed=[(distinct[i], gap) for i, gap in local.removed],
    )
    return model, edges, distinct


def _estimate(
    model: SectorModel, edges: EdgeSet, distinct: list[int], k: int, config: RunConfig
) -> np.ndarray:
    pool = None
    if edges.count < k:
        # Too few edges: fall back to all rays so an (unstable) estimate still exists.
        pool = distinct if len(distinct) >= k else list(range(model.n_sectors))
        logger.debug(f"Only {edges.count} edges for K={k}; searching {len(pool)} rays")
    estimate = select_k_edges(
        model, edges, k, bb_threshold=config.bb_threshold, pool=pool
    )
    return estimate.A_hat


def _run_trial(
    X: np.ndarray,
    trial: int,
    k_range: list[int],
    config: RunConfig,
    seed: int,
    splitter: Splitter,
) -> tuple[list[float], list[list[float]]]:
    fold_a, fold_b = splitter(X.shape[1], child_rng(seed, "fold-split", trial))
    for fold in (fold_a, fold_b):
        if fold.size < config.sectors:
            raise InputError(
                f"fold of {fold.size} points is smaller than J={config.sectors}; "
                "lower J or supply more data"
            )

    # Both folds share the trial's clustering seed.
    cluster_seed = derive_seed(seed, "trial", trial)
    fitted = [fit_edges(X[:, fold], config, cluster_seed) for fold in (fold_a, fold_b)]

    angles: list[float] = []
    random_angles: list[list[float]] = []
    for k in k_range:
        estimates = [
            _estimate(model, edges, distinct, k, config) for model, edges, distinct in fitted
        ]
        random_rays = []
        for f, (model, _, _) in enumerate(fitted):
            rng = child_rng(seed, "random-rays", trial, f, k)
            picks = rng.choice(model.n_sectors, size=k, replace=False)
            random_rays.append(model.rays[:, picks])

        angles.append(min_avg_angle(estimates[0], estimates[1])[0])
        random_angles.append(
            [
                min_avg_angle(estimates[0], random_rays[1])[0],
                min_avg_angle(random_rays[0], estimates[1])[0],
            ]
        )
    logger.debug(f"Trial {trial}: fold angles {np.round(angles, 4).tolist()}")
    return angles, random_angles


def stability_select(
    X: np.ndarray,
    k_max: int,
    trials: int,
    config: Optional[RunConfig] = None,
    seed: int = 0,
    n_jobs: Optional[int] = 1,
    splitter: Optional[Splitter] = None,
) -> StabilityProfile:
    """NMI profile for K = 2..k_max over `trials` two-fold cross-validations.

    Args:
        X: preprocessed M x N data (unit-sum scaled, small norms removed)
        k_max: largest candidate source number (>= 2)
        trials: number of cross-validation trials L
        config: clustering and edge parameters (sectors, restarts, tau, ...)
        seed: master seed
        n_jobs: joblib workers over trials
        splitter: fold partition rule, uniform random halves by default

    Returns:
        StabilityProfile: use `recommended_k` for the selected source number.
    """
    config = config or RunConfig()
    if k_max < 2:
        raise InputError(f"k_max must be >= 2, got {k_max}")
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    if k_max > config.sectors:
        raise InputError(f"k_max={k_max} exceeds the sector count J={config.sectors}")
    X = np.asarray(X, dtype=np.float64)
    k_range = list(range(2, k_max + 1))
    splitter = splitter or random_split

    logger.info(f"Stability analysis: {trials} trials, K = 2..{k_max}")
    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_trial)(X, trial, k_range, config, seed, splitter)
        for trial in range(trials)
    )
    per_trial_angles = [angles for angles, _ in results]
    per_trial_random = [random_angles for _, random_angles in results]

    nmi = nmi_from_terms(np.array(per_trial_angles), np.array(per_trial_random))
    profile = StabilityProfile(
        k_range=k_range,
        nmi=nmi.tolist(),
        trials=trials,
        per_trial_angles=per_trial_angles,
        per_trial_random_angles=per_trial_random,
    )
    logger.info(
        "NMI "
        + ", ".join(f"K={k}: {v:.3f}" for k, v in zip(k_range, profile.nmi))
        + f"; recommended K={profile.recommended_k}"
    )
    return profile
