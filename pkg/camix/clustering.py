"""Sector-based clustering of data points around unit-norm central rays.

Points are assigned to the ray with the smallest point-to-ray distance
||x - (r.x) r|| and every ray is moved to the principal eigenvector of its
sector's autocorrelation matrix. The alternation stops when the total
distortion no longer changes; the best of several random restarts wins.
"""

import logging
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .errors import DegenerateSectorError, InputError
from .geometry import unit_angle, unit_columns
from .models import SectorModel
from .rng import child_rng

logger = logging.getLogger(__name__)

POWER_TOL = 1e-10
POWER_MAX_ITER = 1000
DEFAULT_MAX_ITER = 500


def point_to_ray_distance(x: np.ndarray, r: np.ndarray) -> float:
    """Distance from x to the line spanned by the unit vector r."""
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    return float(np.linalg.norm(x - np.dot(r, x) * r))


def update_ray(
    points: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER
) -> np.ndarray:
    """Unit principal eigenvector of C = sum x x^T over the sector's points.

    Power iteration starts from the sector mean (the first non-zero point
    when the mean vanishes) and the sign is chosen so the ray has a
    non-negative inner product with that start vector.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] == 0:
        raise InputError("cannot update the ray of an empty sector")

    norms = np.linalg.norm(points, axis=0)
    if not np.any(norms > 0):
        raise DegenerateSectorError("sector contains only zero vectors")

    start = points.mean(axis=1)
    if np.linalg.norm(start) <= 1e-12 * norms.max():
        start = points[:, int(np.flatnonzero(norms > 0)[0])]

    C = points @ points.T
    v = start / np.linalg.norm(start)
    for _ in range(max_iter):
        w = C @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        w /= nw
        done = unit_angle(w, v) < tol
        v = w
        if done:
            break

    if np.dot(v, start) < 0:
        v = -v
    return v


def _assign(
    X: np.ndarray, sq_norms: np.ndarray, rays: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-ray assignment (ties to the lowest sector) and squared distances."""
    proj = rays.T @ X
    d2 = np.maximum(sq_norms[None, :] - proj**2, 0.0)
    assignment = np.argmin(d2, axis=0)
    return assignment, d2[assignment, np.arange(X.shape[1])]


def distortion(X: np.ndarray, rays: np.ndarray, assignment: np.ndarray) -> float:
    """Total clustering distortion sum_n ||x_n - (r.x_n) r||^2, computed directly."""
    X = np.asarray(X, dtype=np.float64)
    R = np.asarray(rays, dtype=np.float64)[:, np.asarray(assignment)]
    coef = np.sum(R * X, axis=0)
    residual = X - coef[None, :] * R
    return float(np.sum(residual**2))


def _update_rays(
    X: np.ndarray, rays: np.ndarray, assignment: np.ndarray, d2: np.ndarray
) -> np.ndarray:
    n_sectors = rays.shape[1]
    new_rays = rays.copy()
    sizes = np.bincount(assignment, minlength=n_sectors)

    empty = np.flatnonzero(sizes == 0)
    if empty.size:
        # Farthest points first, ties to the lowest index.
        far = np.lexsort((np.arange(X.shape[1]), -d2))
        for j, idx in zip(empty, far):
            new_rays[:, j] = X[:, idx] / np.linalg.norm(X[:, idx])
        logger.debug(f"Re-seeded {empty.size} empty sectors")

    for j in np.flatnonzero(sizes):
        members = X[:, assignment == j]
        candidate = update_ray(members)
        # Keep the previous ray if rounding left power iteration short of it.
        if np.sum((candidate @ members) ** 2) >= np.sum((rays[:, j] @ members) ** 2):
            new_rays[:, j] = candidate
    return new_rays


def _fit_restart(
    X: np.ndarray, n_sectors: int, restart: int, seed: int, max_iter: int
) -> SectorModel:
    rng = child_rng(seed, "restart", restart)
    n = X.shape[1]
    sq_norms = np.sum(X**2, axis=0)

    start = rng.choice(n, size=n_sectors, replace=False)
    rays = unit_columns(X[:, start])

    assignment, d2 = _assign(X, sq_norms, rays)
    current = float(d2.sum())
    history = [current]
    converged = False

    for _ in range(max_iter):
        rays = _update_rays(X, rays, assignment, d2)
        assignment, d2 = _assign(X, sq_norms, rays)
        new = float(d2.sum())
        history.append(new)
        if current - new <= 1e-12 * current:
            converged = True
            current = new
            break
        current = new

    if not converged:
        logger.warning(
            f"Clustering restart {restart} hit the iteration cap ({max_iter}) "
            "before the distortion settled"
        )

    return SectorModel(
        rays=rays,
        assignment=assignment,
        sector_sizes=np.bincount(assignment, minlength=n_sectors),
        distortion=distortion(X, rays, assignment),
        distortion_history=history,
        iterations=len(history) - 1,
        converged=converged,
        restart_index=restart,
    )


def fit_sectors(
    X: np.ndarray,
    n_sectors: int,
    restarts: int = 20,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    n_jobs: Optional[int] = 1,
) -> SectorModel:
    """Cluster the columns of X into sectors, best of `restarts` runs.

    Args:
        X: M x N data, no all-zero columns
        n_sectors: number of sectors J (<= N)
        restarts: independent random initializations
        seed: master seed; restart r draws from child stream ("restart", r)
        max_iter: iteration cap per restart
        n_jobs: joblib workers for the restarts

    Returns:
        SectorModel: the restart with minimal distortion (ties to the
        lowest restart index).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError(f"data must be a matrix, got shape {X.shape}")
    if n_sectors < 1 or restarts < 1:
        raise InputError("need n_sectors >= 1 and restarts >= 1")
    if X.shape[1] < n_sectors:
        raise InputError(
            f"{X.shape[1]} data points cannot fill {n_sectors} sectors; lower J"
        )
    if np.any(np.linalg.norm(X, axis=0) == 0):
        raise InputError("data contain all-zero points; preprocess first")

    models = Parallel(n_jobs=n_jobs)(
        delayed(_fit_restart)(X, n_sectors, r, seed, max_iter) for r in range(restarts)
    )
    best = min(models, key=lambda m: (m.distortion, m.restart_index))
    logger.debug(
        f"Best of {restarts} restarts: #{best.restart_index}, "
        f"distortion {best.distortion:.6g} after {best.iterations} iterations"
    )

    coef = np.sum(best.rays[:, best.assignment] * X, axis=0)
    obtuse = int(np.sum(coef < 0))
    if obtuse:
        logger.warning(
            f"{obtuse} points make more than 90 degrees with their sector ray; "
            "consider more sectors"
        )
    return best
