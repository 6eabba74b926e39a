"""Seeded Monte Carlo experiments over the simulation + estimation pipeline.

Every experiment derives per-chunk random streams from a single root seed with
a fixed chunk size, so results are bit-identical for any worker count.  The
experiments back the `mc` CLI command and the empirical verification suite:

* consistency       - error of tau_hat versus the observation horizon,
* tau-law           - normalized change-point error and interval coverage,
* lambda-normality  - variance/covariance of the rate estimates,
* test-size         - rejection rate of the constant-rate test under H0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimators import (
    ChangePointFit,
    RateSaturationError,
    change_point,
    indicator_series,
    lambda_from_gamma,
)
from .inference import LimitQuantiles, h0_statistic, tau_confidence_interval
from .parallel import child_seeds, chunk_counts, run_chunked
from .telegraph import GridSample, RateProfile, integrate_to_grid, simulate_events

__all__ = [
    "ExperimentResult",
    "simulate_switch_sample",
    "replicate_fits",
    "consistency_experiment",
    "tau_law_experiment",
    "lambda_normality_experiment",
    "test_size_experiment",
]

_CHUNK = 25


@dataclass
class ExperimentResult:
    """Per-replication rows plus aggregate summary of one experiment."""

    name: str
    rows: list[dict]
    summary: dict
    arrays: dict = field(default_factory=dict, repr=False)


def simulate_switch_sample(
    lambda1: float,
    lambda2: float | None = None,
    tau: float | None = None,
    v: float = 1.0,
    delta: float = 0.01,
    n: int = 10_000,
    sign0: int | str = "random",
    rng: np.random.Generator | None = None,
) -> GridSample:
    """Simulate a grid-sampled telegraph path, optionally with one rate switch.

    The switch happens at theta_0 = tau * n * delta; omit ``lambda2``/``tau``
    for the homogeneous case.
    """
    if (lambda2 is None) != (tau is None):
        raise ValueError("lambda2 and tau must be given together")
    horizon = n * delta
    if lambda2 is None:
        profile = RateProfile.constant(lambda1)
    else:
        if not 0.0 < tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
        profile = RateProfile.single_switch(lambda1, lambda2, at=tau * horizon)
    events = simulate_events(profile, horizon, sign0=sign0, rng=rng)
    return integrate_to_grid(events, v=v, delta=delta)


# ----------------------------------------------------------------------
# replicated change-point fits
# ----------------------------------------------------------------------

def _fit_chunk(spec: tuple) -> np.ndarray:
    seed_seq, count, lam1, lam2, tau, v, delta, n = spec
    out = np.empty((count, 5))
    for i, child in enumerate(seed_seq.spawn(count)):
        rng = np.random.default_rng(child)
        sample = simulate_switch_sample(lam1, lam2, tau, v=v, delta=delta, n=n, rng=rng)
        y = indicator_series(sample, v)
        try:
            fit = change_point(y)
            row = (fit.tau_hat, fit.gamma1, fit.gamma2, fit.lambda1, fit.lambda2)
        except RateSaturationError:
            # Essentially impossible at sane meshes; keep the replication slot.
            row = (math.nan,) * 5
        out[i] = row
    return out


def replicate_fits(
    lambda1: float,
    lambda2: float,
    tau: float,
    v: float,
    delta: float,
    n: int,
    replications: int,
    seed: int,
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Arrays of (tau_hat, gamma1, gamma2, lambda1, lambda2) over replications."""
    counts = chunk_counts(replications, _CHUNK)
    seeds = child_seeds(seed, len(counts))
    specs = [(ss, cnt, lambda1, lambda2, tau, v, delta, n) for ss, cnt in zip(seeds, counts)]
    stacked = np.concatenate(run_chunked(_fit_chunk, specs, workers=workers))
    return {
        "tau_hat": stacked[:, 0],
        "gamma1": stacked[:, 1],
        "gamma2": stacked[:, 2],
        "lambda1": stacked[:, 3],
        "lambda2": stacked[:, 4],
    }


# ----------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------

def consistency_experiment(
    horizons: Sequence[float],
    lambda1: float = 1.0,
    lambda2: float = 3.0,
    tau: float = 0.5,
    v: float = 1.0,
    delta: float = 0.01,
    replications: int = 200,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentResult:
    """Error of tau_hat across observation horizons T (n = T/delta)."""
    rows: list[dict] = []
    summary_rows = []
    medians = {}
    for t_idx, horizon in enumerate(horizons):
        n = int(round(horizon / delta))
        fits = replicate_fits(
            lambda1, lambda2, tau, v, delta, n, replications, seed + t_idx, workers
        )
        abs_err = np.abs(fits["tau_hat"] - tau)
        gap = fits["gamma2"] - fits["gamma1"]
        normalized = n * delta * gap * gap * abs_err
        for r in range(replications):
            rows.append(
                {
                    "T": horizon,
                    "n": n,
                    "rep": r,
                    "tau_hat": fits["tau_hat"][r],
                    "abs_err": abs_err[r],
                    "normalized_err": normalized[r],
                }
            )
        med_abs = float(np.median(abs_err))
        med_norm = float(np.median(normalized))
        medians[horizon] = (med_abs, med_norm)
        summary_rows.append(
            {
                "T": horizon,
                "n": n,
                "median_abs_err": med_abs,
                "median_normalized_err": med_norm,
            }
        )
    return ExperimentResult(
        name="consistency",
        rows=rows,
        summary={"per_horizon": summary_rows},
        arrays={"medians": medians},
    )


def tau_law_experiment(
    lambda1: float = 1.0,
    lambda2: float = 3.0,
    tau: float = 0.5,
    v: float = 1.0,
    delta: float = 0.01,
    n: int = 20_000,
    replications: int = 500,
    alpha: float = 0.10,
    argmax_quantiles: LimitQuantiles | None = None,
    plugin: str = "mean",
    seed: int = 0,
    workers: int = 1,
) -> ExperimentResult:
    """Normalized change-point error and coverage of the tau interval."""
    if argmax_quantiles is None:
        raise ValueError("tau_law_experiment needs an argmax-law quantile table")
    fits = replicate_fits(lambda1, lambda2, tau, v, delta, n, replications, seed, workers)
    rows: list[dict] = []
    covered = np.zeros(replications, dtype=bool)
    normalized = np.empty(replications)
    for r in range(replications):
        gap = fits["gamma2"][r] - fits["gamma1"][r]
        fit = ChangePointFit(
            k_hat=int(round(fits["tau_hat"][r] * n)),
            tau_hat=fits["tau_hat"][r],
            theta_hat=fits["tau_hat"][r] * n * delta,
            gamma1=fits["gamma1"][r],
            gamma2=fits["gamma2"][r],
            lambda1=fits["lambda1"][r],
            lambda2=fits["lambda2"][r],
            n=n,
            delta=delta,
            profile=None,
        )
        ci = tau_confidence_interval(fit, argmax_quantiles, alpha, plugin=plugin)
        covered[r] = ci.lower_unclipped <= tau <= ci.upper_unclipped
        normalized[r] = n * delta * gap * gap * (fits["tau_hat"][r] - tau) / ci.lambda_plugin
        rows.append(
            {
                "rep": r,
                "tau_hat": fits["tau_hat"][r],
                "normalized_err": normalized[r],
                "ci_lower": ci.lower,
                "ci_upper": ci.upper,
                "covered": bool(covered[r]),
            }
        )
    return ExperimentResult(
        name="tau-law",
        rows=rows,
        summary={
            "alpha": alpha,
            "coverage": float(np.mean(covered)),
            "median_normalized_err": float(np.median(normalized)),
        },
        arrays={"normalized": normalized, "covered": covered, "fits": fits},
    )


def lambda_normality_experiment(
    lambda1: float = 1.0,
    lambda2: float = 3.0,
    tau: float = 0.5,
    v: float = 1.0,
    delta: float = 0.01,
    n: int = 20_000,
    replications: int = 500,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentResult:
    """Scaled variance and cross-correlation of the two rate estimates."""
    fits = replicate_fits(lambda1, lambda2, tau, v, delta, n, replications, seed, workers)
    t_total = n * delta
    scaled1 = math.sqrt(t_total) * (fits["lambda1"] - lambda1)
    scaled2 = math.sqrt(t_total) * (fits["lambda2"] - lambda2)
    var1 = float(np.var(scaled1, ddof=1))
    var2 = float(np.var(scaled2, ddof=1))
    corr = float(np.corrcoef(fits["lambda1"], fits["lambda2"])[0, 1])
    rows = [
        {"rep": r, "lambda1_hat": fits["lambda1"][r], "lambda2_hat": fits["lambda2"][r],
         "tau_hat": fits["tau_hat"][r]}
        for r in range(replications)
    ]
    return ExperimentResult(
        name="lambda-normality",
        rows=rows,
        summary={
            "var_scaled_lambda1": var1,
            "var_scaled_lambda2": var2,
            "target_var_lambda1": lambda1 / tau,
            "target_var_lambda2": lambda2 / (1.0 - tau),
            "ratio_lambda1": var1 / (lambda1 / tau),
            "ratio_lambda2": var2 / (lambda2 / (1.0 - tau)),
            "cross_correlation": corr,
        },
        arrays={"fits": fits, "scaled1": scaled1, "scaled2": scaled2},
    )


def _h0_chunk(spec: tuple) -> np.ndarray:
    seed_seq, count, lam0, v, delta, n, trim, variant = spec
    out = np.empty(count)
    for i, child in enumerate(seed_seq.spawn(count)):
        rng = np.random.default_rng(child)
        sample = simulate_switch_sample(lam0, v=v, delta=delta, n=n, rng=rng)
        y = indicator_series(sample, v)
        plugin = lambda_from_gamma(y.mean_rate(), delta)
        out[i] = h0_statistic(y, plugin, trim=trim, variant=variant)
    return out


def test_size_experiment(
    lambda0: float = 2.0,
    v: float = 1.0,
    delta: float = 0.01,
    n: int = 10_000,
    trim: float = 0.10,
    variant: str = "unweighted-sup-D",
    replications: int = 1000,
    alpha: float = 0.05,
    calibration: LimitQuantiles | None = None,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentResult:
    """Rejection rate of the constant-rate test on homogeneous paths."""
    if calibration is None:
        raise ValueError("test_size_experiment needs a bridge-law quantile table")
    counts = chunk_counts(replications, _CHUNK)
    seeds = child_seeds(seed, len(counts))
    specs = [(ss, cnt, lambda0, v, delta, n, trim, variant) for ss, cnt in zip(seeds, counts)]
    stats = np.concatenate(run_chunked(_h0_chunk, specs, workers=workers))
    critical = calibration.quantile(1.0 - alpha)
    rows = [{"rep": r, "statistic": stats[r], "reject": bool(stats[r] > critical)}
            for r in range(replications)]
    return ExperimentResult(
        name="test-size",
        rows=rows,
        summary={
            "alpha": alpha,
            "critical_value": critical,
            "rejection_rate": float(np.mean(stats > critical)),
        },
        arrays={"statistics": stats},
    )
