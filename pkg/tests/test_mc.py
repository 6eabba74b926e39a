"""Tests for the Monte Carlo replication harness."""

from __future__ import annotations

import numpy as np
import pytest

from telegraph_cpd.mc import (
    consistency_experiment,
    lambda_normality_experiment,
    replicate_fits,
    simulate_switch_sample,
    tau_law_experiment,
)
from telegraph_cpd.mc import test_size_experiment as run_test_size
from telegraph_cpd.parallel import child_seeds, chunk_counts, run_chunked


def test_chunk_counts():
    assert chunk_counts(100, 25) == [25, 25, 25, 25]
    assert chunk_counts(60, 25) == [25, 25, 10]
    with pytest.raises(ValueError):
        chunk_counts(0, 25)


def test_child_seeds_deterministic():
    a = child_seeds(42, 5)
    b = child_seeds(42, 5)
    assert [s.entropy for s in a] == [s.entropy for s in b]
    assert [s.spawn_key for s in a] == [s.spawn_key for s in b]


def test_run_chunked_preserves_order():
    def square(x):
        return x * x

    assert run_chunked(square, [3, 1, 4, 1, 5]) == [9, 1, 16, 1, 25]


def test_simulate_switch_sample_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="together"):
        simulate_switch_sample(1.0, lambda2=2.0, rng=rng)
    with pytest.raises(ValueError, match="tau"):
        simulate_switch_sample(1.0, lambda2=2.0, tau=1.5, rng=rng)


def test_replicate_fits_worker_independent():
    kw = dict(lambda1=1.0, lambda2=3.0, tau=0.5, v=1.0, delta=0.01, n=2000,
              replications=50, seed=9)
    a = replicate_fits(**kw, workers=1)
    b = replicate_fits(**kw, workers=2)
    for key in a:
        assert np.array_equal(a[key], b[key]), key
    c = replicate_fits(**{**kw, "seed": 10}, workers=1)
    assert not np.array_equal(a["tau_hat"], c["tau_hat"])


def test_replicate_fits_centered_on_truth():
    fits = replicate_fits(1.0, 3.0, 0.5, 1.0, 0.01, 8000, replications=60, seed=3)
    assert abs(np.median(fits["tau_hat"]) - 0.5) < 0.01
    assert np.mean(fits["lambda1"]) == pytest.approx(1.0, abs=0.15)
    assert np.mean(fits["lambda2"]) == pytest.approx(3.0, abs=0.25)


def test_consistency_experiment_error_shrinks():
    result = consistency_experiment(
        [20.0, 80.0], lambda1=1.0, lambda2=3.0, tau=0.5, v=1.0, delta=0.01,
        replications=40, seed=11,
    )
    per_t = result.summary["per_horizon"]
    assert per_t[0]["T"] == 20.0 and per_t[1]["T"] == 80.0
    assert per_t[1]["median_abs_err"] < per_t[0]["median_abs_err"]
    assert len(result.rows) == 80


def test_tau_law_experiment_coverage(argmax_table):
    result = tau_law_experiment(
        lambda1=1.0, lambda2=3.0, tau=0.5, v=1.0, delta=0.01, n=8000,
        replications=80, alpha=0.10, argmax_quantiles=argmax_table, seed=2,
    )
    assert 0.75 <= result.summary["coverage"] <= 1.0
    assert abs(result.summary["median_normalized_err"]) < 2.0


def test_lambda_normality_experiment_sane():
    result = lambda_normality_experiment(
        lambda1=1.0, lambda2=3.0, tau=0.5, v=1.0, delta=0.01, n=8000,
        replications=80, seed=4,
    )
    assert 0.5 <= result.summary["ratio_lambda1"] <= 1.6
    assert 0.5 <= result.summary["ratio_lambda2"] <= 1.6
    assert abs(result.summary["cross_correlation"]) < 0.35


def test_test_size_experiment(bridge_table_trim01):
    result = run_test_size(
        lambda0=2.0, v=1.0, delta=0.01, n=4000, trim=0.10,
        replications=200, alpha=0.05, calibration=bridge_table_trim01, seed=6,
    )
    assert 0.005 <= result.summary["rejection_rate"] <= 0.12
    assert len(result.arrays["statistics"]) == 200
