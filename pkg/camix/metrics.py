"""Accuracy of mixing-matrix and source estimates against ground truth."""

import logging
from collections.abc import Sequence
from typing import Optional

import numpy as np

from .cam_core import select_marker_points
from .errors import InputError
from .model_select import min_avg_angle
from .models import EvalResult

logger = logging.getLogger(__name__)


def eval_mixing(A_true: np.ndarray, A_hat: np.ndarray) -> tuple[float, np.ndarray]:
    """E_A = 1 - (minimum average angle) / pi, with the optimal pairing.

    pairing[k] is the column of A_hat matched with column k of A_true.
    """
    mean_angle, pairing = min_avg_angle(A_true, A_hat)
    return float(np.clip(1.0 - mean_angle / np.pi, 0.0, 1.0)), pairing


def correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation; 0 (with a warning) when either side is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if denom == 0.0:
        logger.warning("Correlation undefined for a zero-variance source; counting it as 0")
        return 0.0
    return float(np.clip(np.dot(da, db) / denom, -1.0, 1.0))


def _check_sources(S_true: np.ndarray, S_hat: np.ndarray, pairing: Sequence[int]) -> None:
    if S_true.shape != S_hat.shape:
        raise InputError(f"shape mismatch: {S_true.shape} vs {S_hat.shape}")
    if sorted(int(p) for p in pairing) != list(range(S_true.shape[0])):
        raise InputError(f"pairing {list(pairing)} is not a permutation of the sources")


def eval_sources(S_true: np.ndarray, S_hat: np.ndarray, pairing: Sequence[int]) -> float:
    """E_S: mean correlation between every true source and its paired estimate."""
    S_true = np.asarray(S_true, dtype=np.float64)
    S_hat = np.asarray(S_hat, dtype=np.float64)
    _check_sources(S_true, S_hat, pairing)
    return float(
        np.mean([correlation(S_true[k], S_hat[int(p)]) for k, p in enumerate(pairing)])
    )


def eval_marker_patterns(
    S_true: np.ndarray, S_hat: np.ndarray, pairing: Sequence[int], per_source: int
) -> float:
    """E_S restricted, per source, to the points that source dominates most.

    Markers are chosen on the true sources by the dominance ratio
    s_{k,n} / sum_i s_{i,n}.
    """
    S_true = np.asarray(S_true, dtype=np.float64)
    S_hat = np.asarray(S_hat, dtype=np.float64)
    _check_sources(S_true, S_hat, pairing)
    if per_source > S_true.shape[1]:
        raise InputError(f"per_source={per_source} exceeds N={S_true.shape[1]}")

    markers = select_marker_points(S_true, per_source)
    return float(
        np.mean(
            [
                correlation(S_true[k, markers[k]], S_hat[int(p), markers[k]])
                for k, p in enumerate(pairing)
            ]
        )
    )


def evaluate(
    A_true: np.ndarray,
    A_hat: np.ndarray,
    S_true: Optional[np.ndarray] = None,
    S_hat: Optional[np.ndarray] = None,
    per_source: Optional[int] = None,
) -> EvalResult:
    """All metrics available for the given ground truth and estimates."""
    A_true = np.asarray(A_true, dtype=np.float64)
    A_hat = np.asarray(A_hat, dtype=np.float64)
    if A_true.shape != A_hat.shape:
        raise InputError(f"shape mismatch: {A_true.shape} vs {A_hat.shape}")

    e_a, pairing = eval_mixing(A_true, A_hat)
    result = EvalResult(
        E_A=e_a, pairing=pairing.tolist(), mean_angle=(1.0 - e_a) * np.pi
    )
    if S_true is not None and S_hat is not None:
        result.E_S = eval_sources(S_true, S_hat, pairing)
        if per_source:
            per_source = min(per_source, np.asarray(S_true).shape[1])
            result.E_S_markers = eval_marker_patterns(S_true, S_hat, pairing, per_source)
    return result
