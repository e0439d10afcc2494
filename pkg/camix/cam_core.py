"""Convex analysis of mixtures: lateral edges, K-edge selection and sources.

A ray is a lateral edge of the cone of a ray set when it lies strictly
outside the cone spanned by the other rays. Edges are detected on sector
central rays, K of them are chosen by minimizing the sector-size weighted
angle between every ray and the cone of the candidate edges, and sources
are recovered by projecting the data onto that cone.
"""

import itertools
import logging
import math
from collections.abc import Sequence
from typing import Optional, Union

import numpy as np
from joblib import Parallel, delayed

from .errors import InputError, InsufficientEdgesError, RankDeficientError
from .geometry import angle, cone_angle, dedup_direction_indices, nnls, unit_columns
from .models import EdgeSet, GammaNormalization, MixingEstimate, SectorModel, SourceEstimate

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.001
DEFAULT_BB_THRESHOLD = 50_000
CONDITION_WARNING = 1e8


def detect_edges(rays: np.ndarray, tau: float = DEFAULT_TAU) -> EdgeSet:
    """Detect the lateral edges of the cone spanned by the columns of `rays`.

    Rays are visited in ascending index order. Each one is projected onto
    the cone of the rays still in the edge set; it is removed when the
    angle to that projection is at most tau. Removed rays are not revisited.
    Columns are unit-normalized first, so the result does not depend on
    positive rescaling. Repeated directions should be removed beforehand
    (see `geometry.dedup_directions`).
    """
    if tau <= 0:
        raise InputError(f"tau must be positive, got {tau}")
    R = np.asarray(rays, dtype=np.float64)
    if R.ndim != 2 or R.shape[1] == 0:
        raise InputError(f"rays must be a non-empty M x J matrix, got {R.shape}")
    R = unit_columns(R)

    active = list(range(R.shape[1]))
    removed: list[tuple[int, float]] = []
    kept_angles: dict[int, float] = {}
    j = 0
    while j < len(active):
        others = active[:j] + active[j + 1 :]
        if not others:
            kept_angles[active[j]] = float(np.pi)
            j += 1
            continue
        gap = cone_angle(R[:, active[j]], R[:, others])
        if gap > tau:
            kept_angles[active[j]] = gap
            j += 1
        else:
            removed.append((active[j], gap))
            del active[j]

    assert active, "edge detection removed every ray"
    logger.debug(f"Detected {len(active)} edges among {R.shape[1]} rays (tau={tau})")
    return EdgeSet(
        ray_indices=active,
        tau=tau,
        survivor_angles=[kept_angles[i] for i in active],
        removed=removed,
    )


RayFits = dict[int, tuple[float, frozenset]]


def _ray_fits(
    rays: np.ndarray,
    sizes: np.ndarray,
    subset: Sequence[int],
    inherited: Optional[RayFits] = None,
) -> RayFits:
    """Cone angle and projection support of every weighted ray outside the subset.

    A projection onto C{T} whose support lies in T' (a subset of T) is also
    the projection onto C{T'}, so entries of `inherited` computed for a
    superset are reused whenever their support survives.
    """
    basis_index = list(subset)
    members = set(basis_index)
    basis = rays[:, basis_index]
    fits: RayFits = {}
    for j in range(rays.shape[1]):
        if j in members or sizes[j] == 0:
            continue
        if inherited is not None and j in inherited and inherited[j][1] <= members:
            fits[j] = inherited[j]
            continue
        coefficients = nnls(basis, rays[:, j])
        support = frozenset(basis_index[i] for i in np.flatnonzero(coefficients > 0))
        fits[j] = (angle(rays[:, j], basis @ coefficients), support)
    return fits


def _weighted_error(sizes: np.ndarray, fits: RayFits) -> float:
    return float(sum(sizes[j] * fits[j][0] for j in sorted(fits)))


def _subset_error(
    rays: np.ndarray, sizes: np.ndarray, subset: Sequence[int], inherited: RayFits
) -> float:
    return _weighted_error(sizes, _ray_fits(rays, sizes, subset, inherited=inherited))


def fit_error(rays: np.ndarray, sizes: np.ndarray, subset: Sequence[int]) -> float:
    """Model fitting error of a candidate edge subset.

    Sum over all sectors of N_j times the angle between r_j and its
    projection onto the cone of the subset's rays. Rays in the subset and
    rays inside its cone contribute zero.
    """
    R = np.asarray(rays, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    return _weighted_error(sizes, _ray_fits(R, sizes, subset))


def _exhaustive(
    rays: np.ndarray, sizes: np.ndarray, pool: list[int], k: int, n_jobs: Optional[int]
) -> tuple[tuple[int, ...], float, int]:
    subsets = list(itertools.combinations(pool, k))
    # Every subset lies inside the pool, so pool-level projections carry over.
    pool_fits = _ray_fits(rays, sizes, pool)
    errors = Parallel(n_jobs=n_jobs)(
        delayed(_subset_error)(rays, sizes, subset, pool_fits) for subset in subsets
    )
    # Combinations come out in lexicographic order; the first minimum wins ties.
    best = int(np.argmin(errors))
    return subsets[best], float(errors[best]), len(subsets)


def _branch_and_bound(
    rays: np.ndarray, sizes: np.ndarray, pool: list[int], k: int
) -> tuple[tuple[int, ...], float, int]:
    """Removal-tree search over subsets of `pool` of size k.

    Removing edges never lowers the fitting error, so the error of a node
    bounds every subset below it. Removals happen in increasing position
    order so every size-k subset is reached exactly once.
    """
    n_remove = len(pool) - k
    best_subset: Optional[tuple[int, ...]] = None
    best_error = math.inf
    evaluated = 0
    # Slack for rounding in the monotone bound.
    slack = 1e-9

    def visit(
        current: tuple[int, ...], last: int, depth: int, error: float, fits: RayFits
    ) -> None:
        nonlocal best_subset, best_error, evaluated
        if depth == n_remove:
            if error < best_error or (error == best_error and current < best_subset):
                best_subset, best_error = current, error
            return

        children = []
        # Position i may be removed if enough positions remain after it.
        for i in range(last + 1, k + depth + 1):
            removed_edge = pool[i]
            child = tuple(e for e in current if e != removed_edge)
            child_fits = _ray_fits(rays, sizes, child, inherited=fits)
            evaluated += 1
            children.append((_weighted_error(sizes, child_fits), i, child, child_fits))

        for child_error, i, child, child_fits in sorted(children, key=lambda c: (c[0], c[1])):
            if child_error > best_error + slack * max(1.0, best_error):
                continue
            visit(child, i, depth + 1, child_error, child_fits)

    root = tuple(pool)
    root_fits = _ray_fits(rays, sizes, root)
    visit(root, -1, 0, _weighted_error(sizes, root_fits), root_fits)
    assert best_subset is not None
    return best_subset, best_error, evaluated + 1


def select_k_edges(
    model: SectorModel,
    edges: EdgeSet,
    k: int,
    use_branch_and_bound: Optional[bool] = None,
    bb_threshold: int = DEFAULT_BB_THRESHOLD,
    pool: Optional[Sequence[int]] = None,
    n_jobs: Optional[int] = 1,
) -> MixingEstimate:
    """Choose the k edges minimizing the model fitting error.

    Args:
        model: sector model providing rays and sector sizes
        edges: detected edges (candidate pool)
        k: number of sources
        use_branch_and_bound: force the search strategy; by default branch
            and bound is used when C(J*, k) exceeds bb_threshold
        bb_threshold: subset count above which branch and bound kicks in
        pool: override the candidate ray indices (defaults to the edges)
        n_jobs: joblib workers for the exhaustive search

    Returns:
        MixingEstimate: columns rescaled to unit element sum when every
        column sum is positive, otherwise left unit-norm.
    """
    candidates = sorted(pool if pool is not None else edges.ray_indices)
    if k < 1:
        raise InputError(f"K must be >= 1, got {k}")
    if k > len(candidates):
        raise InsufficientEdgesError(len(candidates), k)

    rays = unit_columns(model.rays)
    sizes = np.asarray(model.sector_sizes)

    if use_branch_and_bound is None:
        use_branch_and_bound = math.comb(len(candidates), k) > bb_threshold

    if use_branch_and_bound:
        subset, error, evaluated = _branch_and_bound(rays, sizes, candidates, k)
        search = "branch-and-bound"
    else:
        subset, error, evaluated = _exhaustive(rays, sizes, candidates, k, n_jobs)
        search = "exhaustive"

    logger.debug(f"Selected edges {subset} with fit error {error:.6g} ({search})")
    return MixingEstimate(
        A_hat=normalize_columns(rays[:, list(subset)]),
        selected_edges=list(subset),
        fit_error=error,
        search=search,
        subsets_evaluated=evaluated,
    )


def normalize_columns(A: np.ndarray) -> np.ndarray:
    """Unit element sum per column when all column sums are positive, else unit norm."""
    A = np.asarray(A, dtype=np.float64)
    sums = A.sum(axis=0)
    if np.all(sums > 0):
        return A / sums
    return unit_columns(A)


def _check_rank(A: np.ndarray) -> float:
    if A.shape[1] > A.shape[0] or np.linalg.matrix_rank(A) < A.shape[1]:
        raise RankDeficientError(
            f"mixing estimate ({A.shape[0]} x {A.shape[1]}) does not have full column "
            "rank; sources are not recoverable"
        )
    condition = float(np.linalg.cond(A))
    if condition > CONDITION_WARNING:
        logger.warning(f"Mixing estimate is ill-conditioned (condition number {condition:.3g})")
    return condition


def recover_sources(
    X: np.ndarray, estimate: Union[MixingEstimate, np.ndarray], n_jobs: Optional[int] = 1
) -> SourceEstimate:
    """Non-negative least squares sources for every column of X.

    The NNLS coefficients of x_n on the columns of A_hat are the source
    vector, and A_hat @ S_hat is the projection of X onto C{A_hat}.
    """
    A = estimate.A_hat if isinstance(estimate, MixingEstimate) else np.asarray(estimate)
    A = np.asarray(A, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != A.shape[0]:
        raise InputError(f"X shape {X.shape} does not match A_hat shape {A.shape}")
    _check_rank(A)

    columns = Parallel(n_jobs=n_jobs)(delayed(nnls)(A, X[:, n]) for n in range(X.shape[1]))
    S = np.column_stack(columns) if columns else np.zeros((A.shape[1], 0))
    return SourceEstimate(S_hat=S, projected_X=A @ S)


def build_gamma(A: np.ndarray) -> np.ndarray:
    """A vector with gamma^T a_k > 0 for every column.

    The all-ones vector when it works, otherwise A (A^T A)^{-1} 1, which
    gives gamma^T a_k = 1 exactly.
    """
    A = np.asarray(A, dtype=np.float64)
    ones = np.ones(A.shape[0])
    if np.all(ones @ A > 0):
        return ones
    _check_rank(A)
    return A @ np.linalg.solve(A.T @ A, np.ones(A.shape[1]))


def gamma_normalize(
    X: np.ndarray, estimate: Union[MixingEstimate, np.ndarray], gamma: Optional[np.ndarray] = None
) -> GammaNormalization:
    """Scale data points to unit inner product with gamma.

    Points with gamma^T x_n <= 0 cannot be normalized and are dropped with
    a warning.
    """
    A = estimate.A_hat if isinstance(estimate, MixingEstimate) else np.asarray(estimate)
    X = np.asarray(X, dtype=np.float64)
    gamma = build_gamma(A) if gamma is None else np.asarray(gamma, dtype=np.float64)

    scales = gamma @ X
    kept = np.flatnonzero(scales > 0)
    if kept.size < X.shape[1]:
        logger.warning(
            f"Dropping {X.shape[1] - kept.size} points with non-positive gamma projection"
        )
    return GammaNormalization(
        gamma=gamma,
        X_tilde=X[:, kept] / scales[kept],
        scales=scales[kept],
        kept_indices=kept,
    )


def normalized_sources(A: np.ndarray, S: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Source abundances after gamma normalization.

    s~_{k,n} = gamma^T a_k s_{k,n} / sum_i gamma^T a_i s_{i,n}; every column
    sums to one (all-zero columns stay zero).
    """
    weighted = (np.asarray(gamma) @ np.asarray(A))[:, None] * np.asarray(S, dtype=np.float64)
    totals = weighted.sum(axis=0)
    safe = np.where(totals != 0, totals, 1.0)
    return np.where(totals != 0, weighted / safe, 0.0)


def max_dominance_indices(S_tilde: Union[SourceEstimate, np.ndarray]) -> np.ndarray:
    """Data point of maximal normalized abundance per source (ties to the lowest index)."""
    S = S_tilde.S_hat if isinstance(S_tilde, SourceEstimate) else np.asarray(S_tilde)
    return np.argmax(np.asarray(S, dtype=np.float64), axis=1)


def dominance_ratios(S: np.ndarray) -> np.ndarray:
    """s_{k,n} / sum_i s_{i,n}, zero where a column sums to zero."""
    S = np.asarray(S, dtype=np.float64)
    totals = S.sum(axis=0)
    safe = np.where(totals != 0, totals, 1.0)
    return np.where(totals != 0, S / safe, 0.0)


def select_marker_points(S_hat: Union[SourceEstimate, np.ndarray], per_source: int) -> np.ndarray:
    """The per_source points most dominated by each source.

    Returns a K x per_source index matrix ordered by decreasing dominance
    ratio, ties to the lowest index.
    """
    if per_source < 1:
        raise InputError(f"per_source must be >= 1, got {per_source}")
    S = S_hat.S_hat if isinstance(S_hat, SourceEstimate) else np.asarray(S_hat)
    ratios = dominance_ratios(S)
    n = ratios.shape[1]
    if per_source > n:
        logger.warning(f"Requested {per_source} markers per source but only {n} points exist")
        per_source = n

    index = np.arange(n)
    return np.vstack(
        [np.lexsort((index, -ratios[k]))[:per_source] for k in range(ratios.shape[0])]
    )


def mixing_angle_to_cone(A: np.ndarray) -> np.ndarray:
    """Angle of every column to the cone of the other columns."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[1] == 1:
        return np.array([np.pi])
    return np.array(
        [cone_angle(A[:, k], np.delete(A, k, axis=1)) for k in range(A.shape[1])]
    )


def edge_directions(X: np.ndarray, tau: float = DEFAULT_TAU, dedup_tol: float = 1e-6) -> np.ndarray:
    """Indices of raw data columns that are lateral edges of C{X}."""
    kept = dedup_direction_indices(X, dedup_tol)
    edges = detect_edges(np.asarray(X)[:, kept], tau)
    return kept[edges.ray_indices]


__all__ = [
    "build_gamma",
    "detect_edges",
    "dominance_ratios",
    "edge_directions",
    "fit_error",
    "gamma_normalize",
    "max_dominance_indices",
    "mixing_angle_to_cone",
    "normalize_columns",
    "normalized_sources",
    "recover_sources",
    "select_k_edges",
    "select_marker_points",
]
