"""Synthetic datasets shared by the tests."""

import numpy as np

from camix.datagen import gen_mixed_sources, gen_random_mixing, gen_wgp_sources, mix
from camix.models import Dataset

SCENARIO_SHAPES = {"exact": (4, 4), "over": (6, 4), "under": (3, 4)}


def wgp_dataset(scenario: str = "exact", n: int = 300, seed: int = 0) -> Dataset:
    """Noise-free mixture whose sources contain exact well-grounded points."""
    m, k = SCENARIO_SHAPES[scenario]
    A = gen_random_mixing(m, k, scenario, seed=seed)
    S = gen_wgp_sources(k, n, n_wgp=5, min_share=0.05, seed=seed)
    return Dataset(X=mix(S, A), A_true=A, S_true=S)


def mixed_dataset(k: int = 3, n: int = 300, seed: int = 0) -> Dataset:
    """Noise-free exact-determined mixture without well-grounded points."""
    A = gen_random_mixing(k, k, "exact", seed=seed)
    S = gen_mixed_sources(k, n, min_share=0.05, seed=seed)
    return Dataset(X=mix(S, A), A_true=A, S_true=S)


def simplex_rays() -> np.ndarray:
    """Three edge directions plus two interior rays of the positive orthant."""
    return np.array(
        [
            [1.0, 0.0, 0.0, 1.0, 1.0],
            [0.0, 1.0, 0.0, 1.0, 2.0],
            [0.0, 0.0, 1.0, 1.0, 1.0],
        ]
    )
