"""Synthetic mixtures: toy data, random mixing matrices, noise and SNR."""

import logging
from typing import Literal, Optional

import numpy as np

from .cam_core import mixing_angle_to_cone
from .errors import InfeasibleConstraintError, InfiniteSNRError, InputError
from .models import Dataset, NoiseSpec, ToySpec
from .rng import child_rng

logger = logging.getLogger(__name__)

Scenario = Literal["exact", "over", "under"]

MAX_CONDITION = 4.0
MIN_EDGE_ANGLE = np.pi / 7
MAX_ENTRY = 5.0
DEFAULT_MAX_DRAWS = 10_000

# Mixing matrices of the numerically mixed image experiments.
IMAGE_MIXING_EXACT = np.array(
    [
        [0.7021, 0.1506, 0.1473],
        [0.5668, 0.3442, 0.0890],
        [0.5535, 0.1016, 0.3449],
    ]
)
IMAGE_MIXING_OVER = np.array(
    [
        [0.4082, 0.3274, 0.2644],
        [0.1562, 0.3085, 0.5353],
        [0.3923, 0.0119, 0.5958],
        [0.2376, 0.4015, 0.3609],
        [-0.5894, 0.2941, 0.1165],
    ]
)


def snr_db(X_clean: np.ndarray, noise: NoiseSpec) -> float:
    """10 log10( sum_n ||A s_n||^2 / (N trace(Sigma_noise)) )."""
    X_clean = np.asarray(X_clean, dtype=np.float64)
    trace = float(np.trace(noise.matrix))
    if trace <= 0:
        raise InfiniteSNRError("noise covariance has zero trace; SNR is infinite")
    power = float(np.sum(X_clean**2))
    return float(10.0 * np.log10(power / (X_clean.shape[1] * trace)))


def calibrate_noise_for_snr(
    X_clean: np.ndarray, target_db: float, seed: int = 0
) -> NoiseSpec:
    """Isotropic noise sigma^2 I whose SNR on X_clean equals target_db."""
    if not np.isfinite(target_db):
        raise InputError(f"target SNR must be finite, got {target_db}")
    X_clean = np.asarray(X_clean, dtype=np.float64)
    m, n = X_clean.shape
    variance = float(np.sum(X_clean**2)) / (n * m * 10.0 ** (target_db / 10.0))
    return NoiseSpec.isotropic(m, variance, seed=seed)


def _noise_factor(covariance: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        # Singular but PSD: symmetric square root instead.
        values, vectors = np.linalg.eigh(covariance)
        return vectors * np.sqrt(np.clip(values, 0.0, None))


def sample_noise(noise: NoiseSpec, n: int, seed: Optional[int] = None) -> np.ndarray:
    """M x n matrix of i.i.d. N(0, Sigma_noise) columns."""
    seed = noise.seed if seed is None else seed
    rng = child_rng(seed, "noise")
    standard = rng.standard_normal((noise.dim, n))
    return _noise_factor(noise.matrix) @ standard


def mix(
    S: np.ndarray, A: np.ndarray, noise: Optional[NoiseSpec] = None, seed: Optional[int] = None
) -> np.ndarray:
    """X = A S + E with E columns drawn from the noise spec."""
    S = np.asarray(S, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or S.ndim != 2 or A.shape[1] != S.shape[0]:
        raise InputError(f"cannot mix sources {S.shape} with mixing matrix {A.shape}")
    X = A @ S
    if noise is not None:
        if noise.dim != A.shape[0]:
            raise InputError(f"noise dimension {noise.dim} differs from M={A.shape[0]}")
        X = X + sample_noise(noise, S.shape[1], seed)
    return X


def gen_toy(spec: Optional[ToySpec] = None, seed: int = 0) -> Dataset:
    """Three exponential/half-Gaussian sources mixed by the toy matrix plus noise.

    The first half of the source columns are independent exponentials with
    means mu_exp; the second half are absolute values of correlated
    Gaussians N(mu_gauss, sigma_gauss).
    """
    spec = spec or ToySpec()
    rng = child_rng(seed, "toy-sources")
    half = spec.n_points // 2
    mu_exp = np.asarray(spec.mu_exp, dtype=np.float64)

    exponential = rng.exponential(scale=mu_exp[:, None], size=(mu_exp.size, half))
    gaussian = rng.multivariate_normal(
        np.asarray(spec.mu_gauss, dtype=np.float64),
        np.asarray(spec.sigma_gauss, dtype=np.float64),
        size=spec.n_points - half,
    ).T
    S = np.hstack([exponential, np.abs(gaussian)])
    A = np.asarray(spec.mixing, dtype=np.float64)

    X = mix(S, A, spec.noise, seed=seed)
    if np.trace(spec.noise.matrix) > 0:
        logger.debug(f"Toy data: N={spec.n_points}, SNR {snr_db(A @ S, spec.noise):.2f} dB")
    return Dataset(X=X, A_true=A, S_true=S)


def _check_scenario(m: int, k: int, scenario: str) -> None:
    valid = {
        "exact": m == k,
        "over": m > k,
        "under": m < k and m >= 3,
    }
    if scenario not in valid:
        raise InputError(f"unknown scenario {scenario!r}; use exact, over or under")
    if not valid[scenario]:
        raise InputError(f"M={m}, K={k} is not a valid {scenario}-determined shape")


def gen_random_mixing(
    m: int,
    k: int,
    scenario: Scenario,
    seed: int = 0,
    mixed_sign: bool = False,
    max_draws: int = DEFAULT_MAX_DRAWS,
) -> np.ndarray:
    """Random M x K mixing matrix with unit row sums meeting the scenario constraint.

    exact/over: condition number <= 4. under: every column at least pi/7
    away from the cone of the other columns. Candidates are uniform(0, 1)
    entries, row-normalized, for every scenario by default. With mixed_sign
    entries are uniform(-0.5, 1) and candidates whose normalized entries
    exceed MAX_ENTRY in magnitude, or with a non-positive column sum (a cone
    that is not pointed), are redrawn.
    """
    _check_scenario(m, k, scenario)
    rng = child_rng(seed, "mixing", scenario, m, k)

    for draw in range(max_draws):
        low = -0.5 if mixed_sign else 0.0
        candidate = rng.uniform(low, 1.0, size=(m, k))
        sums = candidate.sum(axis=1)
        if np.any(sums <= 1e-3):
            continue
        candidate = candidate / sums[:, None]
        if np.abs(candidate).max() > MAX_ENTRY or np.any(candidate.sum(axis=0) <= 0):
            continue

        if scenario == "under":
            ok = mixing_angle_to_cone(candidate).min() >= MIN_EDGE_ANGLE
        else:
            ok = np.linalg.cond(candidate) <= MAX_CONDITION
        if ok:
            logger.debug(f"Accepted {scenario} mixing matrix after {draw + 1} draws")
            return candidate

    raise InfeasibleConstraintError(
        f"no {m} x {k} {scenario}-determined mixing matrix met the constraint "
        f"within {max_draws} draws"
    )


def gen_benchmark_sources(k: int, n: int, seed: int = 0, wgp_fraction: float = 0.05) -> np.ndarray:
    """Correlated non-negative sources with approximate well-grounded points.

    A shared log-normal baseline makes the sources correlated; a fraction of
    the points per source get that source boosted so it clearly dominates.
    """
    rng = child_rng(seed, "benchmark-sources")
    base = rng.lognormal(mean=0.0, sigma=1.0, size=n)
    S = base[None, :] * rng.uniform(0.5, 1.5, size=(k, n))
    S += rng.exponential(0.3, size=(k, n))

    per_source = max(1, int(wgp_fraction * n))
    chosen = rng.permutation(n)[: per_source * k].reshape(k, per_source)
    for source, columns in enumerate(chosen):
        others = np.arange(k) != source
        S[np.ix_(others, columns)] *= rng.uniform(0.0, 0.05, size=(k - 1, per_source))
        S[source, columns] *= rng.uniform(2.0, 4.0, size=per_source)
    return S


def gen_wgp_sources(
    k: int, n: int, n_wgp: int = 5, min_share: float = 0.05, seed: int = 0
) -> np.ndarray:
    """Non-negative sources with exact well-grounded points.

    The first n_wgp * k columns are one-hot (n_wgp per source, random
    magnitudes); the remaining columns are mixed with every source holding
    at least `min_share` of the column total.
    """
    if n_wgp * k > n:
        raise InputError(f"{n_wgp * k} well-grounded points do not fit in N={n}")
    if not 0 <= min_share * k < 1:
        raise InputError(f"min_share={min_share} is infeasible for K={k}")
    rng = child_rng(seed, "wgp-sources")

    wgp = np.zeros((k, n_wgp * k))
    for source in range(k):
        wgp[source, source * n_wgp : (source + 1) * n_wgp] = rng.uniform(0.5, 2.0, n_wgp)

    mixed = gen_mixed_sources(k, n - n_wgp * k, min_share=min_share, seed=seed)
    return np.hstack([wgp, mixed])


def gen_mixed_sources(k: int, n: int, min_share: float = 0.05, seed: int = 0) -> np.ndarray:
    """Strictly mixed sources: every source holds at least `min_share` of each column."""
    if not 0 <= min_share * k < 1:
        raise InputError(f"min_share={min_share} is infeasible for K={k}")
    rng = child_rng(seed, "mixed-sources")
    shares = rng.dirichlet(np.ones(k), size=n).T
    shares = min_share + (1.0 - min_share * k) * shares
    return shares * rng.uniform(0.5, 2.0, size=n)
