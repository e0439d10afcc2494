"""Observation preprocessing: unit-sum scaling and small-norm filtering."""

import logging

import numpy as np

from .errors import InputError
from .models import PreprocessReport

logger = logging.getLogger(__name__)


def as_observations(X: np.ndarray) -> np.ndarray:
    """Validate an M x N observation matrix (M >= 2, finite entries)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError(f"observations must be a matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise InputError(f"need at least 2 mixtures, got M={X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise InputError("observations contain non-finite entries")
    return X


def unit_sum_scale(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale every mixture (row) to unit sum.

    Returns:
        tuple[np.ndarray, np.ndarray]: scaled matrix and the row sums that
        restore the original amplitudes (X = diag(scales) @ scaled).
    """
    X = as_observations(X)
    scales = X.sum(axis=1)
    bad = np.flatnonzero(~(scales > 0))
    if bad.size:
        row = int(bad[0])
        raise InputError(
            f"row {row} has non-positive sum {scales[row]:.6g}; cannot scale to unit sum"
        )
    return X / scales[:, None], scales


def filter_small_norms(
    X: np.ndarray, remove_fraction: float
) -> tuple[np.ndarray, PreprocessReport]:
    """Remove the floor(remove_fraction * N) columns with the smallest norms.

    Ties in norm are broken by column index, lower index removed first.
    Kept columns keep their original order.
    """
    if not 0 <= remove_fraction < 1:
        raise InputError(f"remove_fraction must be in [0, 1), got {remove_fraction}")
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    n_remove = int(np.floor(remove_fraction * n))
    if n - n_remove < 2:
        raise InputError(f"only {n - n_remove} data points would remain; need at least 2")

    norms = np.linalg.norm(X, axis=0)
    order = np.lexsort((np.arange(n), norms))
    kept = np.sort(order[n_remove:])

    report = PreprocessReport(kept_indices=kept.tolist(), removed_count=n_remove)
    logger.debug(f"Removed {n_remove} of {n} small-norm points")
    return X[:, kept], report


def preprocess(X: np.ndarray, remove_fraction: float) -> tuple[np.ndarray, PreprocessReport]:
    """Unit-sum scaling followed by small-norm filtering."""
    scaled, scales = unit_sum_scale(X)
    filtered, report = filter_small_norms(scaled, remove_fraction)
    report.row_scales = scales.tolist()

    nonzero = np.linalg.norm(filtered, axis=0) > 0
    if not nonzero.all():
        logger.warning(f"Dropping {int((~nonzero).sum())} all-zero data points")
        kept = np.asarray(report.kept_indices)[nonzero]
        if kept.size < 2:
            raise InputError("fewer than 2 non-zero data points remain")
        report = PreprocessReport(
            kept_indices=kept.tolist(),
            removed_count=report.total - kept.size,
            row_scales=report.row_scales,
        )
        filtered = filtered[:, nonzero]
    return filtered, report
