"""Pytest configuration and shared fixtures."""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from camix.config import RunConfig


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def rng():
    """Seeded generator for test data."""
    return np.random.default_rng(12345)


@pytest.fixture
def small_config():
    """Run config small enough for unit-speed pipeline runs."""
    return RunConfig(sectors=12, restarts=4, trials=4, k_max=5, remove_fraction=0.3)


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch):
    """Keep CAMIX_* variables from the developer shell out of the tests."""
    for name in ("CAMIX_CONFIG_PATH", "CAMIX_N_JOBS", "CAMIX_DEBUG"):
        monkeypatch.delenv(name, raising=False)


def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line("markers", "slow: tests that take a long time to run")
    config.addinivalue_line("markers", "integration: integration tests")
    config.addinivalue_line("markers", "unit: unit tests")
