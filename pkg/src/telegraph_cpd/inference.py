"""Constant-rate hypothesis test, limit-law calibration, and confidence intervals.

Under a constant switching rate the normalized CUSUM profile of the indicator
series converges to a Brownian bridge, so the trimmed supremum of |D_k| (or of
the variance-weighted |V_k|) can be compared against Monte Carlo quantiles of
the corresponding bridge functional.  The change-point error, rescaled by
n*delta*gamma_gap^2 / lambda, converges to the argmax of a two-sided Brownian
motion with triangular drift; its simulated quantiles give confidence
intervals for the change fraction tau.

Critical values are produced by seeded simulation (:func:`simulate_bridge_sup`,
:func:`simulate_argmax_law`) and cached as :class:`LimitQuantiles` tables.  An
analytic series for the distribution of the untrimmed bridge supremum
(:func:`kolmogorov_sup_cdf`) ships as an independent oracle for the simulator.

Normalization note: the statistic is the self-normalized pivot
sqrt(n * p / (1-p)) * max|D_k| with p = 1 - exp(-lambda0*delta), the exact
mean/standard-deviation studentization of the indicator CUSUM.  It is
invariant under the time-unit convention chosen for delta and tends to
sqrt(n*delta*lambda0) * max|D_k| in the fine-mesh limit.  The weighted variant
uses sqrt(n*delta^2 / (p(1-p))) * max|V_k|, which tends to
sqrt(n*delta/lambda0) * max|V_k|.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .estimators import (
    ChangePointFit,
    IndicatorSeries,
    NoSwitchError,
    StatProfile,
    lambda_from_gamma,
    stat_profile,
)
from .parallel import child_seeds, chunk_counts, run_chunked

__all__ = [
    "VARIANT_UNWEIGHTED",
    "VARIANT_WEIGHTED",
    "LAW_BRIDGE_SUP",
    "LAW_WEIGHTED_BRIDGE_SUP",
    "LAW_ARGMAX",
    "TestResult",
    "LimitQuantiles",
    "NoRateChangeError",
    "TauInterval",
    "LambdaConfidence",
    "trimmed_k_range",
    "h0_statistic",
    "h0_test",
    "bridge_sup_sample",
    "simulate_bridge_sup",
    "argmax_location_sample",
    "simulate_argmax_law",
    "kolmogorov_sup_cdf",
    "kolmogorov_sup_quantile",
    "tau_confidence_interval",
    "lambda_confidence",
]

VARIANT_UNWEIGHTED = "unweighted-sup-D"
VARIANT_WEIGHTED = "weighted-sup-V"

LAW_BRIDGE_SUP = "bridge-sup"
LAW_WEIGHTED_BRIDGE_SUP = "weighted-bridge-sup"
LAW_ARGMAX = "argmax-two-sided-bm"

VARIANT_TO_LAW = {
    VARIANT_UNWEIGHTED: LAW_BRIDGE_SUP,
    VARIANT_WEIGHTED: LAW_WEIGHTED_BRIDGE_SUP,
}

# Quantile levels stored in every table: dense enough to interpolate p-values
# to ~1e-3, plus the extremes for out-of-range reporting.
_LEVELS = np.concatenate(
    [[0.0], np.round(np.linspace(0.001, 0.999, 999), 6), [0.9995, 0.9999, 1.0]]
)

_BRIDGE_CHUNK = 512
_ARGMAX_CHUNK = 512


class NoRateChangeError(ValueError):
    """Raised when gamma_hat_1 = gamma_hat_2: the tau interval is undefined."""


# ----------------------------------------------------------------------
# test statistic
# ----------------------------------------------------------------------

def trimmed_k_range(n: int, trim: float) -> tuple[int, int]:
    """Integer k range [trim*n, (1-trim)*n] intersected with [1, n-1]."""
    if not 0.0 <= trim < 0.5:
        raise ValueError(f"trim must lie in [0, 1/2), got {trim!r}")
    lo = max(1, int(math.ceil(trim * n - 1e-9)))
    hi = min(n - 1, int(math.floor((1.0 - trim) * n + 1e-9)))
    if lo > hi:
        raise ValueError(f"trimmed range empty: n = {n} is too small for trim = {trim}")
    return lo, hi


def h0_statistic(
    y: IndicatorSeries,
    lambda0: float,
    trim: float = 0.05,
    variant: str = VARIANT_UNWEIGHTED,
    profile: StatProfile | None = None,
) -> float:
    """Trimmed supremum statistic for H0: the switching rate is constant.

    ``lambda0`` is the (known or plugged-in) constant rate; the statistic is
    studentized through p = 1 - exp(-lambda0*delta), the switch probability of
    one interval.  See the module docstring for the exact normalizations.
    """
    if not lambda0 > 0.0:
        raise ValueError(f"lambda0 must be positive, got {lambda0!r}")
    if not 0.0 < trim < 0.5:
        raise ValueError(f"trim must lie in (0, 1/2), got {trim!r}")
    if profile is None:
        profile = stat_profile(y)
    n = y.n
    lo, hi = trimmed_k_range(n, trim)
    q0 = math.exp(-lambda0 * y.delta)
    p0 = -math.expm1(-lambda0 * y.delta)
    if variant == VARIANT_UNWEIGHTED:
        scale = math.sqrt(n * p0 / q0)
        return scale * float(np.max(np.abs(profile.d[lo - 1 : hi])))
    if variant == VARIANT_WEIGHTED:
        scale = math.sqrt(n * y.delta * y.delta / (p0 * q0))
        return scale * float(np.max(np.abs(profile.vstat[lo - 1 : hi])))
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class TestResult:
    """Outcome of the constant-rate test on one segment."""

    statistic: float
    variant: str
    trim: float
    lambda0_plugin: float
    critical_value: float
    p_value: float
    reject: bool
    alpha: float

    def to_json_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "variant": self.variant,
            "trim": self.trim,
            "lambda0_plugin": self.lambda0_plugin,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
        }


def h0_test(
    y: IndicatorSeries,
    calibration: "LimitQuantiles",
    alpha: float = 0.05,
    lambda0: float | None = None,
    trim: float = 0.05,
    variant: str = VARIANT_UNWEIGHTED,
    profile: StatProfile | None = None,
) -> TestResult:
    """Run the constant-rate test against a calibrated quantile table.

    When ``lambda0`` is None the plug-in rate estimated from the whole series
    is used; the decision is identical either way for equal numeric values.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    expected_law = VARIANT_TO_LAW.get(variant)
    if expected_law is None:
        raise ValueError(f"unknown variant {variant!r}")
    if calibration.law != expected_law:
        raise ValueError(
            f"calibration law {calibration.law!r} does not match variant {variant!r}"
        )
    if calibration.trim is None or abs(calibration.trim - trim) > 1e-12:
        raise ValueError(
            f"calibration trim {calibration.trim!r} does not match requested trim {trim!r}"
        )
    lam0 = lambda_from_gamma(y.mean_rate(), y.delta) if lambda0 is None else float(lambda0)
    if lam0 <= 0.0:
        raise NoSwitchError("no switching events observed: the test is undefined")
    stat = h0_statistic(y, lam0, trim=trim, variant=variant, profile=profile)
    critical = calibration.quantile(1.0 - alpha)
    pval = calibration.p_value(stat)
    return TestResult(
        statistic=stat,
        variant=variant,
        trim=trim,
        lambda0_plugin=lam0,
        critical_value=critical,
        p_value=pval,
        reject=stat > critical,
        alpha=alpha,
    )


# ----------------------------------------------------------------------
# quantile tables
# ----------------------------------------------------------------------

@dataclass
class LimitQuantiles:
    """Simulated quantiles of a limit law, reproducible from the recorded seed."""

    law: str
    trim: float | None
    grid_size: int
    replications: int
    seed: int
    quantiles: dict[float, float]
    span: float | None = None

    def __post_init__(self) -> None:
        levels = np.asarray(sorted(self.quantiles), dtype=np.float64)
        values = np.asarray([self.quantiles[float(l)] for l in levels], dtype=np.float64)
        if np.any(np.diff(values) < 0.0):
            raise ValueError("quantiles must be monotone in the level")
        self._levels = levels
        self._values = values

    def quantile(self, level: float) -> float:
        """Quantile at ``level``, linearly interpolated between stored levels."""
        if not 0.0 <= level <= 1.0:
            raise ValueError(f"level must lie in [0, 1], got {level!r}")
        return float(np.interp(level, self._levels, self._values))

    def p_value(self, statistic: float) -> float:
        """Right-tail probability of ``statistic`` under the simulated law.

        Interpolates the empirical CDF; beyond the largest simulated value the
        returned value 1/replications is an upper bound for the true p-value.
        """
        if statistic >= self._values[-1]:
            return 1.0 / self.replications
        if statistic <= self._values[0]:
            return 1.0
        level = float(np.interp(statistic, self._values, self._levels))
        return max(1.0 - level, 1.0 / self.replications)

    def to_json_dict(self) -> dict:
        return {
            "law": self.law,
            "trim": self.trim,
            "grid_size": self.grid_size,
            "replications": self.replications,
            "seed": self.seed,
            "span": self.span,
            "quantiles": {f"{l:.6f}": self.quantiles[l] for l in sorted(self.quantiles)},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LimitQuantiles":
        return cls(
            law=d["law"],
            trim=d["trim"],
            grid_size=int(d["grid_size"]),
            replications=int(d["replications"]),
            seed=int(d["seed"]),
            span=d.get("span"),
            quantiles={float(k): float(v) for k, v in d["quantiles"].items()},
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        return path

    @classmethod
    def load(cls, path: str | Path) -> "LimitQuantiles":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _table_from_sample(
    sample: np.ndarray,
    law: str,
    trim: float | None,
    grid_size: int,
    replications: int,
    seed: int,
    span: float | None = None,
) -> LimitQuantiles:
    values = np.quantile(sample, _LEVELS)
    quantiles = {float(l): float(v) for l, v in zip(_LEVELS, values)}
    return LimitQuantiles(
        law=law,
        trim=trim,
        grid_size=grid_size,
        replications=replications,
        seed=seed,
        quantiles=quantiles,
        span=span,
    )


# ----------------------------------------------------------------------
# Brownian bridge supremum
# ----------------------------------------------------------------------

def _bridge_chunk(spec: tuple) -> np.ndarray:
    seed_seq, count, grid_size, trim, weighted = spec
    rng = np.random.default_rng(seed_seq)
    g = grid_size
    h = 1.0 / g
    t = np.arange(g + 1) * h
    z = rng.standard_normal((count, g)) * math.sqrt(h)
    b = np.empty((count, g + 1))
    b[:, 0] = 0.0
    np.cumsum(z, axis=1, out=b[:, 1:])
    total = b[:, -1].copy()
    b[:, 1:] -= np.outer(total, t[1:])

    lo = max(0, int(math.ceil(trim * g - 1e-9)))
    hi = min(g, int(math.floor((1.0 - trim) * g + 1e-9)))
    if hi <= lo:
        raise ValueError(f"grid too coarse for trim {trim}")
    window = b[:, lo : hi + 1]

    if weighted:
        tw = t[lo : hi + 1]
        weight = 1.0 / np.sqrt(tw * (1.0 - tw))
        return np.max(np.abs(window) * weight, axis=1)

    # Exact sup over each grid interval: conditionally on its endpoints the
    # bridge restricted to an interval is again a Brownian bridge, whose
    # maximum has the closed-form inverse CDF used below.
    a = window[:, :-1]
    c = window[:, 1:]
    gap_sq = (a - c) ** 2
    u_pos = rng.random(a.shape)
    u_neg = rng.random(a.shape)
    max_pos = 0.5 * (a + c + np.sqrt(gap_sq - 2.0 * h * np.log(u_pos)))
    max_neg = 0.5 * (-a - c + np.sqrt(gap_sq - 2.0 * h * np.log(u_neg)))
    return np.maximum(max_pos.max(axis=1), max_neg.max(axis=1))


def bridge_sup_sample(
    trim: float,
    variant: str,
    grid_size: int,
    replications: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Raw simulated sample of the (trimmed, possibly weighted) bridge supremum."""
    if variant not in (VARIANT_UNWEIGHTED, VARIANT_WEIGHTED):
        raise ValueError(f"unknown variant {variant!r}")
    weighted = variant == VARIANT_WEIGHTED
    if weighted and not 0.0 < trim < 0.5:
        raise ValueError("the weighted supremum requires trim in (0, 1/2)")
    if not weighted and not 0.0 <= trim < 0.5:
        raise ValueError(f"trim must lie in [0, 1/2), got {trim!r}")
    seeds = child_seeds(seed, len(chunk_counts(replications, _BRIDGE_CHUNK)))
    specs = [
        (ss, cnt, grid_size, trim, weighted)
        for ss, cnt in zip(seeds, chunk_counts(replications, _BRIDGE_CHUNK))
    ]
    return np.concatenate(run_chunked(_bridge_chunk, specs, workers=workers))


def simulate_bridge_sup(
    trim: float,
    variant: str = VARIANT_UNWEIGHTED,
    grid_size: int = 1024,
    replications: int = 100_000,
    seed: int = 0,
    workers: int = 1,
) -> LimitQuantiles:
    """Quantile table for the trimmed bridge supremum law of ``variant``.

    The unweighted law is simulated with exact conditional interval maxima
    (continuous-time supremum, no grid bias); the weighted law takes the
    supremum over grid points.
    """
    if grid_size < 1000:
        raise ValueError(f"grid_size must be at least 1000, got {grid_size}")
    if replications < 10_000:
        raise ValueError(f"replications must be at least 10000, got {replications}")
    sample = bridge_sup_sample(trim, variant, grid_size, replications, seed, workers)
    return _table_from_sample(
        sample,
        law=VARIANT_TO_LAW[variant],
        trim=trim,
        grid_size=grid_size,
        replications=replications,
        seed=seed,
    )


# ----------------------------------------------------------------------
# argmax of the drifted two-sided Brownian motion
# ----------------------------------------------------------------------

def _argmax_chunk(spec: tuple) -> np.ndarray:
    seed_seq, count, grid_size, span = spec
    rng = np.random.default_rng(seed_seq)
    g = grid_size
    h = span / g
    drift = np.arange(1, g + 1) * (h / 2.0)
    rows = np.arange(count)

    z_left = rng.standard_normal((count, g)) * math.sqrt(h)
    path_left = np.cumsum(z_left, axis=1)
    path_left -= drift
    i_left = np.argmax(path_left, axis=1)
    m_left = path_left[rows, i_left]

    z_right = rng.standard_normal((count, g)) * math.sqrt(h)
    path_right = np.cumsum(z_right, axis=1)
    path_right -= drift
    i_right = np.argmax(path_right, axis=1)
    m_right = path_right[rows, i_right]

    loc = np.where(m_right >= m_left, (i_right + 1) * h, -(i_left + 1) * h)
    return np.where(np.maximum(m_left, m_right) <= 0.0, 0.0, loc)


def argmax_location_sample(
    replications: int,
    span: float = 50.0,
    grid_size: int = 2000,
    seed: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Raw simulated argmax locations of W(v) - |v|/2 on [-span, span]."""
    if not span > 0.0:
        raise ValueError(f"span must be positive, got {span!r}")
    if grid_size < 100:
        raise ValueError(f"grid_size must be at least 100, got {grid_size}")
    counts = chunk_counts(replications, _ARGMAX_CHUNK)
    seeds = child_seeds(seed, len(counts))
    specs = [(ss, cnt, grid_size, span) for ss, cnt in zip(seeds, counts)]
    return np.concatenate(run_chunked(_argmax_chunk, specs, workers=workers))


def simulate_argmax_law(
    replications: int = 100_000,
    span: float = 50.0,
    grid_size: int = 2000,
    seed: int = 0,
    workers: int = 1,
) -> LimitQuantiles:
    """Quantile table for argmax_v {W(v) - |v|/2}, W a two-sided Brownian motion.

    The drift confines the argmax: with span = 50 the probability of the
    argmax falling outside (-span, span) is below 1e-3 and quantiles are
    stable under doubling the span (checked in the test suite).
    """
    if replications < 10_000:
        raise ValueError(f"replications must be at least 10000, got {replications}")
    sample = argmax_location_sample(replications, span, grid_size, seed, workers)
    return _table_from_sample(
        sample,
        law=LAW_ARGMAX,
        trim=None,
        grid_size=grid_size,
        replications=replications,
        seed=seed,
        span=span,
    )


# ----------------------------------------------------------------------
# analytic oracle for the untrimmed bridge supremum
# ----------------------------------------------------------------------

def kolmogorov_sup_cdf(x: float) -> float:
    """P(sup |B0| <= x) = 1 - 2 sum_{k>=1} (-1)^{k+1} exp(-2 k^2 x^2)."""
    if x <= 0.0:
        return 0.0
    total = 0.0
    for k in range(1, 200):
        term = (-1.0) ** (k + 1) * math.exp(-2.0 * k * k * x * x)
        total += term
        if abs(term) < 1e-18:
            break
    return max(0.0, min(1.0, 1.0 - 2.0 * total))


def kolmogorov_sup_quantile(alpha: float) -> float:
    """Inverse of :func:`kolmogorov_sup_cdf` by bisection."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    lo, hi = 1e-6, 5.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if kolmogorov_sup_cdf(mid) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------
# confidence intervals
# ----------------------------------------------------------------------

@dataclass
class TauInterval:
    """Confidence interval for the change fraction tau."""

    alpha: float
    tau_hat: float
    half_width: float
    lower: float
    upper: float
    lower_unclipped: float
    upper_unclipped: float
    lambda_plugin: float
    plugin_side: str

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "tau_hat": self.tau_hat,
            "half_width": self.half_width,
            "lower": self.lower,
            "upper": self.upper,
            "lower_unclipped": self.lower_unclipped,
            "upper_unclipped": self.upper_unclipped,
            "lambda_plugin": self.lambda_plugin,
            "plugin_side": self.plugin_side,
        }


def tau_confidence_interval(
    fit: ChangePointFit,
    quantiles: LimitQuantiles,
    alpha: float,
    plugin: str = "mean",
) -> TauInterval:
    """Interval tau_hat +/- q_{1-alpha/2} * lambda_plugin / (n*delta*gamma_gap^2).

    ``plugin`` selects the rate estimate for the limit scale; in the
    small-rate-change regime all choices are consistent for the common rate.
    "left"/"right" use the respective segment estimates, "mean" (default) and
    "geometric" symmetrize them - with a sizable rate gap the one-sided
    choices noticeably under- or over-cover, while the symmetric ones keep
    the coverage near nominal (see the Monte Carlo suite).  Endpoints are
    clipped to [0, 1]; the unclipped values are reported too.
    """
    if quantiles.law != LAW_ARGMAX:
        raise ValueError(f"expected an {LAW_ARGMAX!r} table, got {quantiles.law!r}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    gap = fit.gamma_gap
    if gap == 0.0:
        raise NoRateChangeError("no estimated rate change; interval undefined")
    if plugin == "left":
        lam = fit.lambda1
    elif plugin == "right":
        lam = fit.lambda2
    elif plugin == "mean":
        lam = 0.5 * (fit.lambda1 + fit.lambda2)
    elif plugin == "geometric":
        lam = math.sqrt(fit.lambda1 * fit.lambda2)
    else:
        raise ValueError(
            f"plugin must be 'left', 'right', 'mean' or 'geometric', got {plugin!r}"
        )
    q = max(0.0, quantiles.quantile(1.0 - alpha / 2.0))
    half = q * lam / (fit.n * fit.delta * gap * gap)
    lower_raw = fit.tau_hat - half
    upper_raw = fit.tau_hat + half
    return TauInterval(
        alpha=alpha,
        tau_hat=fit.tau_hat,
        half_width=half,
        lower=max(0.0, lower_raw),
        upper=min(1.0, upper_raw),
        lower_unclipped=lower_raw,
        upper_unclipped=upper_raw,
        lambda_plugin=lam,
        plugin_side=plugin,
    )


@dataclass
class LambdaConfidence:
    """Marginal normal intervals for the two segment rates."""

    alpha: float
    left: tuple[float, float]
    right: tuple[float, float]

    def to_json_dict(self) -> dict:
        return {"alpha": self.alpha, "left": list(self.left), "right": list(self.right)}


def lambda_confidence(fit: ChangePointFit, alpha: float, n: int, delta: float) -> LambdaConfidence:
    """Intervals lambda_hat_j +/- z_{1-alpha/2} * sqrt(lambda_hat_j / (tau_j * n * delta)).

    The two estimates come from disjoint segments, so the limiting covariance
    is diagonal and the coordinates are treated independently.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    tau1 = fit.tau_hat
    tau2 = 1.0 - fit.tau_hat
    if not (0.0 < tau1 < 1.0):
        raise ValueError(f"tau_hat must lie strictly inside (0, 1), got {tau1!r}")
    z = NormalDist().inv_cdf(1.0 - alpha / 2.0)
    t_total = n * delta
    hw1 = z * math.sqrt(fit.lambda1 / (tau1 * t_total))
    hw2 = z * math.sqrt(fit.lambda2 / (tau2 * t_total))
    return LambdaConfidence(
        alpha=alpha,
        left=(fit.lambda1 - hw1, fit.lambda1 + hw1),
        right=(fit.lambda2 - hw2, fit.lambda2 + hw2),
    )
