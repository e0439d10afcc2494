"""Unit tests for configuration management."""

import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from camix.config import RunConfig, Settings
from camix.errors import StorageError


class TestSettings:
    """Test Settings configuration and validation."""

    def test_default_settings(self):
        """Test default configuration values."""
        settings = Settings()

        assert settings.config_path is None
        assert settings.n_jobs == 1
        assert not settings.debug

    def test_environment_variable_override(self, monkeypatch):
        """Test that CAMIX_ environment variables override defaults."""
        monkeypatch.setenv("CAMIX_N_JOBS", "4")
        monkeypatch.setenv("CAMIX_DEBUG", "true")
        monkeypatch.setenv("CAMIX_CONFIG_PATH", "/tmp/run.yaml")

        settings = Settings()

        assert settings.n_jobs == 4
        assert settings.debug
        assert settings.config_path == Path("/tmp/run.yaml")

    def test_config_path_expansion(self):
        """Test that user paths are expanded."""
        settings = Settings(config_path=Path("~/camix.yaml"))

        assert settings.config_path == Path.home() / "camix.yaml"


class TestRunConfig:
    """Test run parameters and their sources."""

    def test_defaults(self):
        """Test the toy-experiment defaults."""
        config = RunConfig()

        assert config.sectors == 30
        assert config.restarts == 20
        assert config.tau == 0.001
        assert config.remove_fraction == 0.5
        assert config.trials == 30
        assert config.bb_threshold == 50_000
        assert config.k is None

    @pytest.mark.parametrize(
        "field,value",
        [("sectors", 0), ("tau", 0.0), ("remove_fraction", 1.0), ("k_max", 1), ("seed", -1)],
    )
    def test_invalid_values(self, field, value):
        """Test range validation of individual fields."""
        with pytest.raises(ValidationError):
            RunConfig(**{field: value})

    def test_k_above_sectors(self):
        """Test that a fixed K cannot exceed J."""
        with pytest.raises(ValidationError):
            RunConfig(sectors=5, k=6)

    def test_from_yaml_with_overrides(self, temp_dir):
        """Test YAML loading where explicit overrides win and None is ignored."""
        path = temp_dir / "run.yaml"
        path.write_text("sectors: 12\ntau: 0.01\nrestarts: 3\n")

        config = RunConfig.from_file(path, restarts=7, tau=None)

        assert config.sectors == 12
        assert config.tau == 0.01
        assert config.restarts == 7

    def test_from_json(self, temp_dir):
        """Test JSON loading."""
        path = temp_dir / "run.json"
        path.write_text(json.dumps({"trials": 5, "k_max": 4}))

        config = RunConfig.from_file(path)

        assert config.trials == 5
        assert config.k_max == 4

    def test_empty_file(self, temp_dir):
        """Test that an empty YAML file gives the defaults."""
        path = temp_dir / "empty.yaml"
        path.write_text("")

        assert RunConfig.from_file(path) == RunConfig()

    def test_malformed_file(self, temp_dir):
        """Test that unparsable files raise a storage error."""
        path = temp_dir / "bad.json"
        path.write_text("{not json")

        with pytest.raises(StorageError):
            RunConfig.from_file(path)

    def test_missing_file(self, temp_dir):
        """Test that a missing file raises a storage error."""
        with pytest.raises(StorageError):
            RunConfig.from_file(temp_dir / "missing.yaml")

    def test_resolve_uses_settings_path(self, temp_dir):
        """Test that the default config file comes from the settings."""
        path = temp_dir / "default.yaml"
        path.write_text("sectors: 9\n")

        config = RunConfig.resolve(settings=Settings(config_path=path), seed=3)

        assert config.sectors == 9
        assert config.seed == 3

    def test_resolve_without_file(self):
        """Test flag overrides on top of the defaults."""
        config = RunConfig.resolve(settings=Settings(), sectors=15, tau=None)

        assert config.sectors == 15
        assert config.tau == 0.001
