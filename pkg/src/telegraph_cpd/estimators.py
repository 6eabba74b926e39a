"""Indicator series and least-squares change-point statistics.

A grid-sampled telegraph path is reduced to the indicator series
Y_i = 1{|X_i - X_{i-1}| < v*delta} / delta: an increment strictly shorter than
the ballistic length v*delta means at least one direction change happened in
that interval.  All detection statistics are functions of this 0/(1/delta)
series:

* D_k = k/n - S_k/S_n, the CUSUM-type contrast,
* V_k = sqrt(k(n-k))/n * (mean of last n-k Y's - mean of first k Y's),
* U_k^2, the two-segment least-squares residual sum, with the exact
  decomposition  sum (Y_i - Ybar)^2 = U_k^2 + n V_k^2.

The change point is estimated by k_hat = argmax_k |D_k| (smallest k on ties),
and the per-segment switch rates by lambda = -log(1 - gamma*delta)/delta with
gamma the segment mean of Y.

Note: argmax |D_k| is *not* always the minimizer of U_k^2 - the least-squares
objective weights the mean contrast by k(n-k), see tests for a counterexample.
argmax |D| is the estimator implemented throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .telegraph import GridSample

__all__ = [
    "IndicatorSeries",
    "StatProfile",
    "ChangePointFit",
    "NoSwitchError",
    "RateSaturationError",
    "DegeneratePathError",
    "indicator_series",
    "estimate_velocity",
    "stat_profile",
    "change_index",
    "change_point",
    "lambda_from_gamma",
]

# Relative slack under the ballistic length v*delta: increments produced by
# exact simulation land within a few ulps of v*delta, far inside this margin,
# while genuine switch increments are strictly shorter by an O(delta) amount.
INDICATOR_REL_EPS = 1e-12


class NoSwitchError(ValueError):
    """Raised when every Y_i is zero: no switching events observed."""


class RateSaturationError(ValueError):
    """Raised when gamma*delta = 1: every interval contains a switch, so the
    rate estimate -log(1 - gamma*delta)/delta diverges (mesh too coarse)."""


class DegeneratePathError(ValueError):
    """Raised when all increments are zero and no velocity can be estimated."""


@dataclass
class IndicatorSeries:
    """The Y_i series: each entry is exactly 0 or exactly 1/delta."""

    delta: float
    y: np.ndarray

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=np.float64)
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if self.y.ndim != 1 or self.y.size < 2:
            raise ValueError("need at least 2 indicator values")
        hit = 1.0 / self.delta
        if not np.all((self.y == 0.0) | (self.y == hit)):
            raise ValueError("indicator values must be exactly 0 or 1/delta")

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def switch_fraction(self) -> float:
        """Fraction of intervals containing at least one switch (= gamma*delta)."""
        return float(np.mean(self.y > 0.0))

    def mean_rate(self) -> float:
        """gamma_hat = mean of Y (units 1/time)."""
        return float(np.mean(self.y))

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        lines = ["i,y"] + [f"{i + 1},{self.y[i]:.17g}" for i in range(self.n)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


@dataclass
class StatProfile:
    """D_k, V_k, U_k^2 profiles for k = 1..n-1 plus the total sum of squares."""

    d: np.ndarray
    vstat: np.ndarray
    usq: np.ndarray
    total_ss: float

    def __post_init__(self) -> None:
        self.d = np.asarray(self.d, dtype=np.float64)
        self.vstat = np.asarray(self.vstat, dtype=np.float64)
        self.usq = np.asarray(self.usq, dtype=np.float64)
        if not (self.d.size == self.vstat.size == self.usq.size >= 1):
            raise ValueError("profile arrays must have equal length >= 1")

    @property
    def n(self) -> int:
        return int(self.d.size) + 1

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        lines = ["k,d,v,usq"]
        for k in range(self.d.size):
            lines.append(
                f"{k + 1},{self.d[k]:.17g},{self.vstat[k]:.17g},{self.usq[k]:.17g}"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


@dataclass
class ChangePointFit:
    """Estimated change point and the per-segment rate estimates around it."""

    k_hat: int
    tau_hat: float
    theta_hat: float
    gamma1: float
    gamma2: float
    lambda1: float
    lambda2: float
    n: int
    delta: float
    profile: StatProfile | None
    v_hat: float | None = None

    @property
    def gamma_gap(self) -> float:
        """gamma_hat_2 - gamma_hat_1, the estimated mean-rate jump."""
        return self.gamma2 - self.gamma1

    @property
    def lambda_gap(self) -> float:
        return self.lambda2 - self.lambda1


def indicator_series(sample: GridSample, v: float) -> IndicatorSeries:
    """Build Y_i from the increments of ``sample`` at speed ``v``.

    Y_i = 1/delta when |X_i - X_{i-1}| < v*delta strictly (the interval saw at
    least one switch), else 0.  The comparison uses a v*delta*1e-12 margin so
    exactly-ballistic increments stay classified as 0 despite float rounding.
    """
    if not v > 0.0:
        raise ValueError(f"velocity must be positive, got {v!r}")
    eta = sample.increments
    threshold = v * sample.delta * (1.0 - INDICATOR_REL_EPS)
    y = np.where(np.abs(eta) < threshold, 1.0 / sample.delta, 0.0)
    return IndicatorSeries(delta=sample.delta, y=y)


def estimate_velocity(sample: GridSample, signed: bool = False) -> float:
    """Estimate the speed as the average rescaled increment - mean|X_i - X_{i-1}|/delta.

    ``signed=True`` averages the raw increments instead of their absolute
    values; that variant converges to X(T)/T (near zero for long paths) and is
    exposed for comparison only.
    """
    eta = sample.increments
    if signed:
        return float(np.mean(eta) / sample.delta)
    v = float(np.mean(np.abs(eta)) / sample.delta)
    if v <= 0.0:
        raise DegeneratePathError("degenerate path: all increments are zero")
    return v


def lambda_from_gamma(gamma: float, delta: float) -> float:
    """Switch-rate estimate lambda = -log(1 - gamma*delta)/delta.

    Inverts gamma = (1 - exp(-lambda*delta))/delta.  Monotone increasing in
    gamma and always >= gamma; -> gamma as delta -> 0.
    """
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    x = gamma * delta
    if x < 0.0 or x > 1.0 + 1e-12:
        raise ValueError(f"gamma*delta must lie in [0, 1], got {x!r}")
    if x >= 1.0:
        raise RateSaturationError(
            "rate saturated: every interval contains a switch (gamma*delta = 1); "
            "the mesh is too coarse for a finite rate estimate"
        )
    return -math.log1p(-x) / delta


def stat_profile(y: IndicatorSeries) -> StatProfile:
    """Compute D_k, V_k and U_k^2 for all k in O(n) via prefix sums.

    Raises :class:`NoSwitchError` when S_n = 0 (D is undefined).  The
    decomposition total_ss = U_k^2 + n*V_k^2 is verified on construction to
    1e-9 relative.
    """
    yv = y.y
    n = y.n
    s = np.cumsum(yv)
    q = np.cumsum(yv * yv)
    s_n = s[-1]
    if s_n <= 0.0:
        raise NoSwitchError("no switching events observed: S_n = 0")

    k = np.arange(1, n, dtype=np.float64)
    s_k = s[:-1]
    q_k = q[:-1]
    d = k / n - s_k / s_n
    mean_left = s_k / k
    mean_right = (s_n - s_k) / (n - k)
    vstat = np.sqrt(k * (n - k)) / n * (mean_right - mean_left)
    usq = (q_k - s_k * s_k / k) + ((q[-1] - q_k) - (s_n - s_k) ** 2 / (n - k))
    total_ss = float(q[-1] - s_n * s_n / n)

    resid = np.abs(total_ss - (usq + n * vstat * vstat))
    if np.max(resid) > 1e-9 * max(total_ss, 1e-300):
        raise ArithmeticError(
            "sum-of-squares decomposition violated beyond 1e-9 relative; "
            "this indicates a numerical problem with the input series"
        )
    return StatProfile(d=d, vstat=vstat, usq=usq, total_ss=total_ss)


def change_index(y: IndicatorSeries, k_range: tuple[int, int] | None = None) -> int:
    """k_hat = argmax_k |D_k| over ``k_range`` (default [1, n-1]), smallest k on ties.

    Y is exactly 0/(1/delta), so |D_k| is proportional to the integer
    |k*m - n*count_k|; the integer argmax makes smallest-k tie-breaking exact
    instead of at the mercy of float rounding.
    """
    n = y.n
    lo, hi = (1, n - 1) if k_range is None else k_range
    if not (1 <= lo <= hi <= n - 1):
        raise ValueError(f"invalid k range [{lo}, {hi}] for n = {n}")
    counts = np.cumsum((y.y > 0.0).astype(np.int64))
    m = int(counts[-1])
    if m == 0:
        raise NoSwitchError("no switching events observed: S_n = 0")
    score = np.abs(np.arange(1, n, dtype=np.int64) * m - n * counts[:-1])
    return lo + int(np.argmax(score[lo - 1 : hi]))


def change_point(
    y: IndicatorSeries,
    k_range: tuple[int, int] | None = None,
) -> ChangePointFit:
    """Estimate the change point and the switching rates on both sides of it.

    ``k_range`` restricts the argmax to [lo, hi] (1-based, inclusive); the
    default is the full range [1, n-1].  Per-segment rates are the means of Y
    left and right of k_hat mapped through :func:`lambda_from_gamma`; a
    saturated segment (every interval switching) raises
    :class:`RateSaturationError`.
    """
    profile = stat_profile(y)
    k_hat = change_index(y, k_range)
    n = y.n

    s = np.cumsum(y.y)
    gamma1 = float(s[k_hat - 1] / k_hat)
    gamma2 = float((s[-1] - s[k_hat - 1]) / (n - k_hat))
    lam1 = lambda_from_gamma(gamma1, y.delta)
    lam2 = lambda_from_gamma(gamma2, y.delta)
    return ChangePointFit(
        k_hat=k_hat,
        tau_hat=k_hat / n,
        theta_hat=k_hat * y.delta,
        gamma1=gamma1,
        gamma2=gamma2,
        lambda1=lam1,
        lambda2=lam2,
        n=n,
        delta=y.delta,
        profile=profile,
    )
