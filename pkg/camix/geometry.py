"""Convex cone geometry: angles, membership and projection onto cones.

A cone C{B} is the set of non-negative combinations of the columns of B.
Projecting v onto C{B} is the non-negative least squares problem
min_{a >= 0} ||v - B a||, solved here with a Lawson-Hanson active set.
All angles are in radians.
"""

import logging
from typing import Optional

import numpy as np

from .errors import ConvergenceError, InputError
from .models import Projection

logger = logging.getLogger(__name__)

_EPS = np.finfo(np.float64).eps


def _as_vector(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InputError(f"{name} must be a non-empty vector, got shape {v.shape}")
    return v


def _as_basis(B: np.ndarray) -> np.ndarray:
    B = np.asarray(B, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    if B.ndim != 2 or B.shape[1] == 0:
        raise InputError(f"cone basis must be a d x Q matrix with Q >= 1, got {B.shape}")
    return B


def angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angle between two vectors in [0, pi].

    A zero vector makes 180 degrees with any non-zero vector; two zero
    vectors make 0.
    """
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape != v.shape:
        raise InputError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")

    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 and nv == 0.0:
        return 0.0
    if nu == 0.0 or nv == 0.0:
        return float(np.pi)
    return unit_angle(u / nu, v / nv)


def unit_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between two unit vectors, accurate near zero."""
    return float(2.0 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def unit_columns(X: np.ndarray) -> np.ndarray:
    """Scale every non-zero column to unit norm; zero columns stay zero."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return X / safe


def nnls(B: np.ndarray, v: np.ndarray, max_iter: Optional[int] = None) -> np.ndarray:
    """Solve argmin_{a >= 0} ||v - B a||^2 by the Lawson-Hanson active set method.

    Args:
        B: d x Q matrix of cone generators
        v: d-vector
        max_iter: pivot budget, defaults to 30 * Q

    Returns:
        The Q non-negative coefficients.

    Raises:
        ConvergenceError: if the pivot budget runs out, which signals an
            ill-conditioned basis.
    """
    B = _as_basis(B)
    v = _as_vector(v, "v")
    d, q = B.shape
    if v.shape[0] != d:
        raise InputError(f"dimension mismatch: basis has {d} rows, vector has {v.shape[0]}")

    if max_iter is None:
        max_iter = 30 * q

    Btv = B.T @ v
    scale = max(np.abs(Btv).max(initial=0.0), np.abs(B).max(initial=0.0) ** 2, 1e-300)
    tol = 10.0 * max(d, q) * _EPS * scale

    x = np.zeros(q)
    passive = np.zeros(q, dtype=bool)
    blocked = np.zeros(q, dtype=bool)
    w = Btv.copy()
    pivots = 0

    while True:
        candidates = ~passive & ~blocked
        if not candidates.any() or w[candidates].max() <= tol:
            break
        if pivots >= max_iter:
            raise ConvergenceError(
                f"NNLS did not converge within {max_iter} pivots (ill-conditioned basis)"
            )
        pivots += 1

        j = int(np.flatnonzero(candidates)[np.argmax(w[candidates])])
        passive[j] = True
        first = True

        while True:
            z = np.zeros(q)
            z[passive] = np.linalg.lstsq(B[:, passive], v, rcond=None)[0]

            if np.all(z[passive] > 0):
                x = z
                blocked[:] = False
                break

            if first and z[j] <= 0:
                # Rounding made the entering column useless; skip it this round.
                passive[j] = False
                blocked[j] = True
                break
            first = False

            pivots += 1
            if pivots > max_iter:
                raise ConvergenceError(
                    f"NNLS did not converge within {max_iter} pivots (ill-conditioned basis)"
                )

            shrink = np.flatnonzero(passive & (z <= 0))
            ratios = x[shrink] / (x[shrink] - z[shrink])
            hit = int(np.argmin(ratios))
            x = x + ratios[hit] * (z - x)
            x[shrink[hit]] = 0.0
            passive &= x > 0
            x[~passive] = 0.0

        w = B.T @ (v - B @ x)

    return np.maximum(x, 0.0)


def project_onto_cone(v: np.ndarray, B: np.ndarray) -> Projection:
    """Project v onto the cone generated by the columns of B."""
    B = _as_basis(B)
    v = _as_vector(v, "v")
    coefficients = nnls(B, v)
    image = B @ coefficients
    return Projection(image=image, coefficients=coefficients, angle=angle(v, image))


def cone_angle(v: np.ndarray, B: np.ndarray) -> float:
    """Angle between v and its projection onto C{B}."""
    B = _as_basis(B)
    return angle(v, B @ nnls(B, v))


def is_in_cone(v: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> bool:
    """True when v is (within tol radians) a non-negative combination of B."""
    return cone_angle(v, B) <= tol


def dedup_direction_indices(points: np.ndarray, tol: float) -> np.ndarray:
    """Indices of a maximal set of columns with pairwise angles >= tol.

    Columns are visited by decreasing norm (ties by index), so from every
    group of near-colinear columns the largest one is kept. Zero columns
    carry no direction and are dropped. The result is sorted ascending.
    """
    if tol < 0:
        raise InputError(f"tol must be >= 0, got {tol}")
    points = _as_basis(points)
    norms = np.linalg.norm(points, axis=0)
    units = unit_columns(points)

    order = np.lexsort((np.arange(points.shape[1]), -norms))
    kept: list[int] = []
    for idx in order:
        if norms[idx] == 0.0:
            continue
        if kept:
            u = units[:, idx]
            others = units[:, kept]
            gaps = 2.0 * np.arctan2(
                np.linalg.norm(others - u[:, None], axis=0),
                np.linalg.norm(others + u[:, None], axis=0),
            )
            if gaps.min() < tol:
                continue
        kept.append(int(idx))
    return np.array(sorted(kept), dtype=int)


def dedup_directions(points: np.ndarray, tol: float) -> np.ndarray:
    """Columns of `points` left after removing repeated directions."""
    points = _as_basis(points)
    return points[:, dedup_direction_indices(points, tol)]
