"""End-to-end decomposition of an observation matrix."""

import logging
import time
from typing import Optional

import numpy as np

from .cam_core import normalize_columns, recover_sources, select_k_edges
from .config import RunConfig
from .errors import InputError, RankDeficientError
from .model_select import fit_edges, stability_select
from .models import Diagnostics, ResultBundle
from .preprocess import as_observations, preprocess

logger = logging.getLogger(__name__)


def decompose(
    X: np.ndarray,
    config: Optional[RunConfig] = None,
    k: Optional[int] = None,
    seed: Optional[int] = None,
    n_jobs: Optional[int] = 1,
) -> ResultBundle:
    """Run preprocessing, clustering, edge detection, K selection and source recovery.

    When neither `k` nor `config.k` is set the source number comes from
    stability analysis over K = 2..config.k_max. A_hat is returned in the
    original observation space with unit column sums (unit norm when a
    column sum is not positive). S_hat covers every input column and is
    omitted when A_hat cannot be inverted (K > M or rank deficient).
    """
    started = time.perf_counter()
    config = config or RunConfig()
    seed = config.seed if seed is None else seed
    k = k if k is not None else config.k
    X = as_observations(X)
    m = X.shape[0]

    Xp, report = preprocess(X, config.remove_fraction)
    if Xp.shape[1] < config.sectors:
        raise InputError(
            f"{Xp.shape[1]} points remain after preprocessing, fewer than J={config.sectors}"
        )
    logger.info(
        f"Decomposing {m} x {X.shape[1]} data: kept {len(report.kept_indices)} points, "
        f"J={config.sectors}"
    )

    profile = None
    if k is None:
        profile = stability_select(
            Xp, config.k_max, config.trials, config=config, seed=seed, n_jobs=n_jobs
        )
        k = profile.recommended_k
    elif k > config.sectors:
        raise InputError(f"K={k} exceeds the sector count J={config.sectors}")

    model, edges, _ = fit_edges(Xp, config, seed, n_jobs=n_jobs)
    logger.info(f"Detected {edges.count} lateral edges among {model.n_sectors} sector rays")
    estimate = select_k_edges(
        model, edges, k, bb_threshold=config.bb_threshold, n_jobs=n_jobs
    )

    scales = np.asarray(report.row_scales)
    A_hat = normalize_columns(scales[:, None] * model.rays[:, estimate.selected_edges])

    under_determined = k > m
    S_hat = None
    condition = None
    if under_determined:
        logger.warning(
            f"Under-determined mixture (K={k} > M={m}): A_hat only, sources are not recoverable"
        )
    else:
        try:
            S_hat = recover_sources(X, A_hat, n_jobs=n_jobs).S_hat
            condition = float(np.linalg.cond(A_hat))
        except RankDeficientError as e:
            logger.warning(f"{e}; emitting A_hat without sources")

    diagnostics = Diagnostics(
        distortion=model.distortion,
        sectors=model.n_sectors,
        edges_detected=edges.count,
        edge_indices=edges.ray_indices,
        points_kept=len(report.kept_indices),
        points_removed=report.removed_count,
        search=estimate.search,
        condition_number=condition,
        under_determined=under_determined,
        elapsed_seconds=time.perf_counter() - started,
    )
    return ResultBundle(
        A_hat=A_hat,
        S_hat=S_hat,
        chosen_K=k,
        nmi_profile=profile,
        fit_error=estimate.fit_error,
        selected_edges=estimate.selected_edges,
        diagnostics=diagnostics,
    )
