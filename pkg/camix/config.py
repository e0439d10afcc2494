"""Configuration for camix runs."""

import json
from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import BaseModel, Field, model_validator

try:
    from pydantic_settings import BaseSettings, SettingsConfigDict
except ImportError:  # pragma: no cover
    from pydantic import BaseSettings  # type: ignore[no-redef]

    SettingsConfigDict = dict  # type: ignore[misc,assignment]

from .errors import StorageError


class Settings(BaseSettings):
    """Process-level defaults read from the environment.

    Only the location of the default run-config file, the log level and the
    worker count come from here; algorithm parameters live in `RunConfig`.
    """

    model_config = SettingsConfigDict(
        env_prefix="CAMIX_", env_file=".env", env_file_encoding="utf-8"
    )

    # Default run-config file (YAML or JSON)
    config_path: Optional[Path] = None

    # Worker processes for restarts, trials and benchmark replicates
    n_jobs: int = 1

    # Debug logging
    debug: bool = False

    def __init__(self, **kwargs: Any):
        super().__init__(**kwargs)
        if isinstance(self.config_path, Path):
            self.config_path = self.config_path.expanduser()


class RunConfig(BaseModel):
    """Parameters of one CAM run.

    Defaults follow the toy experiment: 30 sectors, 20 clustering restarts,
    tau = 0.001 rad, half of the points removed, 30 cross-validation trials.
    """

    sectors: int = Field(30, ge=1, description="Number of sectors J")
    restarts: int = Field(20, ge=1, description="Clustering restarts")
    tau: float = Field(0.001, gt=0, description="Edge test threshold (radians)")
    remove_fraction: float = Field(
        0.5, ge=0, lt=1, description="Fraction of small-norm points removed"
    )
    k: Optional[int] = Field(None, ge=1, description="Fixed source count")
    k_max: int = Field(8, ge=2, description="Largest K tried by stability analysis")
    trials: int = Field(30, ge=1, description="Two-fold cross-validation trials")
    seed: int = Field(0, ge=0, description="Master seed")
    bb_threshold: int = Field(
        50_000, ge=1, description="Subset count above which branch and bound is used"
    )
    dedup_tol: float = Field(
        1e-6, ge=0, description="Angle below which two rays count as one direction"
    )
    max_iter: int = Field(500, ge=1, description="Clustering iteration cap")
    marker_count: int = Field(800, ge=1, description="Marker points per source")

    @model_validator(mode="after")
    def check_k_range(self) -> "RunConfig":
        if self.k is not None and self.k > self.sectors:
            raise ValueError(f"k={self.k} exceeds the sector count {self.sectors}")
        return self

    @classmethod
    def from_file(cls, path: Path, **overrides: Any) -> "RunConfig":
        """Load a YAML or JSON config file; non-None overrides win."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"Cannot read config file {path}: {e}") from e

        try:
            if Path(path).suffix.lower() == ".json":
                data = json.loads(text)
            else:
                data = yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise StorageError(f"Malformed config file {path}: {e}") from e

        data = dict(data or {})
        data.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**data)

    @classmethod
    def resolve(
        cls, path: Optional[Path] = None, settings: Optional[Settings] = None, **overrides: Any
    ) -> "RunConfig":
        """Build the effective config: file (explicit or default) plus flag overrides."""
        path = path or (settings or Settings()).config_path
        if path is not None:
            return cls.from_file(path, **overrides)
        return cls(**{key: value for key, value in overrides.items() if value is not None})
