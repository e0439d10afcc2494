"""Integration tests for the Monte Carlo benchmark."""

import numpy as np
import pytest

from camix import benchmark
from camix.benchmark import aggregate, run_benchmark
from camix.config import RunConfig
from camix.errors import InputError
from camix.models import ReplicateRecord


class TestAggregate:
    """Test per-SNR aggregation."""

    def test_means_failures_and_order_accuracy(self):
        """Test a hand-computed aggregate."""
        records = [
            ReplicateRecord(replicate=0, snr_db=20.0, true_K=4, E_A=0.9, E_S=0.8, chosen_K=4),
            ReplicateRecord(replicate=1, snr_db=20.0, true_K=4, E_A=0.7, E_S=0.6, chosen_K=3),
            ReplicateRecord(replicate=2, snr_db=20.0, true_K=4, error="InsufficientEdgesError"),
            ReplicateRecord(replicate=0, snr_db=30.0, true_K=4, E_A=1.0),
        ]

        cells = aggregate("exact", records)

        assert [cell.snr_db for cell in cells] == [20.0, 30.0]
        assert cells[0].replicates == 3
        assert cells[0].failures == 1
        assert cells[0].mean_E_A == pytest.approx(0.8)
        assert cells[0].mean_E_S == pytest.approx(0.7)
        assert cells[0].order_accuracy == 0.5
        assert cells[1].order_accuracy is None
        assert cells[1].mean_E_S is None


class TestRunBenchmark:
    """Test small benchmark sweeps."""

    def test_small_sweep(self, small_config):
        """Test record layout for two SNR levels."""
        records, cells = run_benchmark(
            "exact", [25.0, 35.0], 2, n_points=300, config=small_config, seed=1, select_order=False
        )

        assert [(r.snr_db, r.replicate) for r in records] == [
            (25.0, 0),
            (25.0, 1),
            (35.0, 0),
            (35.0, 1),
        ]
        assert len(cells) == 2
        assert all(cell.replicates == 2 for cell in cells)
        for record in records:
            assert record.failed or 0.0 <= record.E_A <= 1.0

    def test_independent_of_worker_count(self, small_config):
        """Test that parallel and serial sweeps agree."""
        kwargs = dict(n_points=300, config=small_config, seed=4, select_order=False)

        serial, _ = run_benchmark("over", [30.0], 2, n_jobs=1, **kwargs)
        parallel, _ = run_benchmark("over", [30.0], 2, n_jobs=2, **kwargs)

        assert serial == parallel

    @pytest.mark.slow
    def test_order_selection(self, small_config):
        """Test that order selection fills chosen_K."""
        records, cells = run_benchmark(
            "exact", [40.0], 1, n_points=300, config=small_config, seed=0
        )

        assert records[0].failed or records[0].chosen_K in range(2, 6)
        assert cells[0].order_accuracy in (None, 0.0, 1.0)

    @pytest.mark.parametrize(
        "scenario,snr,replicates", [("sideways", [20.0], 1), ("exact", [], 1), ("exact", [20.0], 0)]
    )
    def test_invalid_arguments(self, scenario, snr, replicates):
        """Test argument validation."""
        with pytest.raises(InputError):
            run_benchmark(scenario, snr, replicates)

    def test_numerical_failure_is_recorded(self, small_config, monkeypatch):
        """Test that a linear-algebra failure marks one replicate and the sweep continues."""
        calls = {"n": 0}
        real_decompose = benchmark.decompose

        def flaky_decompose(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                raise np.linalg.LinAlgError("SVD did not converge")
            return real_decompose(*args, **kwargs)

        monkeypatch.setattr(benchmark, "decompose", flaky_decompose)
        records, cells = run_benchmark(
            "exact", [30.0], 2, n_points=300, config=small_config, seed=2, select_order=False
        )

        assert records[0].error == "LinAlgError: SVD did not converge"
        assert calls["n"] == 2
        assert records[1].error != records[0].error
        assert cells[0].failures == sum(r.failed for r in records)


@pytest.mark.slow
class TestBenchmarkAcceptance:
    """Test scaled-down benchmark runs at 40 dB with the default parameters."""

    def test_under_determined_recovery(self):
        """Test mean E_A >= 0.90 over 10 under-determined replicates with K given."""
        records, cells = run_benchmark(
            "under", [40.0], 10, config=RunConfig(), seed=0, select_order=False, n_jobs=-1
        )

        assert cells[0].failures == 0
        assert cells[0].mean_E_A >= 0.90

    def test_exact_model_order(self):
        """Test that stability analysis picks K = 4 on at least 9 of 10 exact replicates."""
        records, _ = run_benchmark(
            "exact", [40.0], 10, config=RunConfig(), seed=0, select_order=True, n_jobs=-1
        )

        assert sum(r.chosen_K == 4 for r in records) >= 9
