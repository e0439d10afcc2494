"""Data models for CAM inputs, intermediate results and outputs."""

from datetime import datetime
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ArrayModel(BaseModel):
    """Base for models that carry numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


class Projection(ArrayModel):
    """Projection of a vector onto a finitely generated cone."""

    image: np.ndarray = Field(..., description="Projected point, inside the cone")
    coefficients: np.ndarray = Field(..., description="Non-negative generator weights")
    angle: float = Field(..., ge=0, le=np.pi, description="Angle to the image (radians)")


class PreprocessReport(BaseModel):
    """Provenance of the small-norm filtering step."""

    kept_indices: list[int] = Field(..., description="Original column indices kept")
    removed_count: int = Field(..., ge=0, description="Number of columns removed")
    row_scales: list[float] = Field(
        default_factory=list, description="Row sums divided out by unit-sum scaling"
    )

    @field_validator("kept_indices")
    @classmethod
    def validate_increasing(cls, v):
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("kept_indices must be strictly increasing")
        return v

    @property
    def total(self) -> int:
        return self.removed_count + len(self.kept_indices)


class SectorModel(ArrayModel):
    """Sector partition of the data with unit-norm central rays."""

    rays: np.ndarray = Field(..., description="M x J matrix of unit-norm central rays")
    assignment: np.ndarray = Field(..., description="Sector index of every point")
    sector_sizes: np.ndarray = Field(..., description="Points per sector (N_j)")
    distortion: float = Field(..., ge=0, description="Total clustering distortion")
    distortion_history: list[float] = Field(default_factory=list)
    iterations: int = Field(0, ge=0)
    converged: bool = True
    restart_index: int = Field(0, ge=0)

    @property
    def n_sectors(self) -> int:
        return int(self.rays.shape[1])


class EdgeSet(BaseModel):
    """Sector rays that survived the lateral edge test."""

    ray_indices: list[int] = Field(..., description="Surviving ray indices (J* of them)")
    tau: float = Field(..., gt=0, description="Edge test threshold (radians)")
    survivor_angles: list[float] = Field(
        default_factory=list, description="Angle of each survivor to the cone of the others"
    )
    removed: list[tuple[int, float]] = Field(
        default_factory=list, description="(ray index, angle) of every removed ray"
    )

    @field_validator("ray_indices")
    @classmethod
    def validate_non_empty(cls, v):
        if not v:
            raise ValueError("an edge set needs at least one survivor")
        return v

    @property
    def count(self) -> int:
        return len(self.ray_indices)


class MixingEstimate(ArrayModel):
    """Estimated mixing matrix built from K selected edges."""

    A_hat: np.ndarray = Field(..., description="M x K estimated mixing matrix")
    selected_edges: list[int] = Field(..., description="Ray indices of the chosen edges")
    fit_error: float = Field(..., ge=0, description="Model fitting error of the selection")
    search: str = Field("exhaustive", description="exhaustive or branch-and-bound")
    subsets_evaluated: int = Field(0, ge=0)

    @property
    def n_sources(self) -> int:
        return int(self.A_hat.shape[1])


class SourceEstimate(ArrayModel):
    """Non-negative source estimate and the cone projection of the data."""

    S_hat: np.ndarray = Field(..., description="K x N non-negative sources")
    projected_X: np.ndarray = Field(..., description="M x N projection of X onto the cone")


class GammaNormalization(ArrayModel):
    """Data points scaled to unit inner product with gamma."""

    gamma: np.ndarray
    X_tilde: np.ndarray = Field(..., description="Normalized points (kept columns only)")
    scales: np.ndarray = Field(..., description="gamma^T x_n of the kept columns")
    kept_indices: np.ndarray


class StabilityProfile(BaseModel):
    """Normalized model instability per candidate source number."""

    k_range: list[int]
    nmi: list[float]
    trials: int = Field(..., ge=1)
    per_trial_angles: list[list[float]] = Field(
        ..., description="trials x |k_range| fold-vs-fold angles"
    )
    per_trial_random_angles: list[list[list[float]]] = Field(
        ..., description="trials x |k_range| x 2 random-baseline angles"
    )

    @model_validator(mode="after")
    def check_lengths(self) -> "StabilityProfile":
        if len(self.nmi) != len(self.k_range):
            raise ValueError("nmi and k_range lengths differ")
        if len(self.per_trial_angles) != self.trials:
            raise ValueError("per_trial_angles must have one row per trial")
        return self

    @property
    def recommended_k(self) -> int:
        """Smallest K attaining the minimum NMI."""
        best = min(self.nmi)
        return self.k_range[self.nmi.index(best)]


class EvalResult(BaseModel):
    """Accuracy of an estimate against ground truth."""

    E_A: float = Field(..., ge=0, le=1)
    E_S: Optional[float] = Field(None, ge=-1, le=1)
    E_S_markers: Optional[float] = Field(None, ge=-1, le=1)
    pairing: list[int] = Field(..., description="Estimated column paired with each true column")
    mean_angle: float = Field(..., ge=0, description="Minimum average angle (radians)")


class NoiseSpec(BaseModel):
    """Zero-mean Gaussian noise with covariance Sigma_noise."""

    covariance: list[list[float]]
    seed: int = 0

    @field_validator("covariance")
    @classmethod
    def validate_psd(cls, v):
        matrix = np.asarray(v, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(matrix, matrix.T, atol=1e-12, rtol=0):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(matrix).min(initial=0.0) < -1e-12:
            raise ValueError("covariance must be positive semi-definite")
        return v

    @classmethod
    def isotropic(cls, dim: int, variance: float, seed: int = 0) -> "NoiseSpec":
        return cls(covariance=(variance * np.eye(dim)).tolist(), seed=seed)

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.covariance, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.covariance)


def _toy_noise() -> NoiseSpec:
    return NoiseSpec.isotropic(3, 0.07)


class ToySpec(BaseModel):
    """Synthetic three-source toy dataset."""

    n_points: int = Field(1600, ge=2)
    mixing: list[list[float]] = Field(
        default_factory=lambda: [
            [-0.1, 0.5, 0.6],
            [0.6, -0.1, 0.5],
            [0.5, 0.6, -0.1],
        ]
    )
    mu_exp: list[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])
    mu_gauss: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    sigma_gauss: list[list[float]] = Field(
        default_factory=lambda: [
            [1.0, 0.9, 0.9],
            [0.9, 1.0, 0.9],
            [0.9, 0.9, 1.0],
        ]
    )
    noise: NoiseSpec = Field(default_factory=_toy_noise)

    @field_validator("n_points")
    @classmethod
    def validate_even(cls, v):
        if v % 2:
            raise ValueError("n_points must be even")
        return v


class Dataset(ArrayModel):
    """Observations with optional ground truth."""

    X: np.ndarray
    A_true: Optional[np.ndarray] = None
    S_true: Optional[np.ndarray] = None


class Diagnostics(BaseModel):
    """Run diagnostics recorded next to the estimate."""

    distortion: float = 0.0
    sectors: int = 0
    edges_detected: int = 0
    edge_indices: list[int] = Field(default_factory=list)
    points_kept: int = 0
    points_removed: int = 0
    search: str = "exhaustive"
    condition_number: Optional[float] = None
    under_determined: bool = False
    elapsed_seconds: float = 0.0


class ResultBundle(ArrayModel):
    """Everything a decomposition produces."""

    A_hat: np.ndarray
    S_hat: Optional[np.ndarray] = None
    chosen_K: int = Field(..., ge=1)
    nmi_profile: Optional[StabilityProfile] = None
    fit_error: float = Field(..., ge=0)
    selected_edges: list[int] = Field(default_factory=list)
    diagnostics: Diagnostics = Field(default_factory=Diagnostics)

    @model_validator(mode="after")
    def check_consistency(self) -> "ResultBundle":
        if self.A_hat.shape[1] != self.chosen_K:
            raise ValueError("A_hat column count differs from chosen_K")
        if self.S_hat is not None and self.S_hat.shape[0] != self.chosen_K:
            raise ValueError("S_hat row count differs from chosen_K")
        return self


class Manifest(BaseModel):
    """Provenance record written next to generated or computed files."""

    command: str
    subcommand: Optional[str] = None
    seed: int = 0
    parameters: dict[str, Any] = Field(default_factory=dict)
    files: list[str] = Field(default_factory=list)
    version: str = ""
    payload_hash: str = ""
    created_at: Optional[datetime] = None


class ReplicateRecord(BaseModel):
    """One benchmark replicate at one SNR level."""

    replicate: int
    snr_db: float
    E_A: Optional[float] = None
    E_S: Optional[float] = None
    E_S_markers: Optional[float] = None
    chosen_K: Optional[int] = None
    true_K: int
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


class BenchmarkCell(BaseModel):
    """Aggregated benchmark results for one SNR level."""

    scenario: str
    snr_db: float
    replicates: int
    failures: int = 0
    mean_E_A: Optional[float] = None
    mean_E_S: Optional[float] = None
    mean_E_S_markers: Optional[float] = None
    order_accuracy: Optional[float] = None
