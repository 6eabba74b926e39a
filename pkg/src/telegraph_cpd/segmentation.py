"""Sequential change-point detection for price series.

Prices are transformed to simple returns, the returns are treated as the
increments of a telegraph path (speed estimated per segment as the mean
rescaled increment), and the change-point detector runs recursively: a segment
is split at its detected change index when the constant-rate test rejects,
and the procedure re-runs on both children with freshly estimated velocities.

All indices in reports are global 1-based increment indices of the original
series: change index k means the shift is estimated between increments k and
k+1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimators import (
    ChangePointFit,
    DegeneratePathError,
    NoSwitchError,
    RateSaturationError,
    StatProfile,
    change_point,
    estimate_velocity,
    indicator_series,
)
from .inference import (
    LAW_ARGMAX,
    LambdaConfidence,
    LimitQuantiles,
    NoRateChangeError,
    TauInterval,
    TestResult,
    VARIANT_UNWEIGHTED,
    VARIANT_WEIGHTED,
    h0_test,
    lambda_confidence,
    tau_confidence_interval,
    trimmed_k_range,
)
from .telegraph import GridSample

__all__ = [
    "PriceSeries",
    "SegmentationConfig",
    "Segment",
    "SegmentationReport",
    "SegmentNotAnalyzable",
    "returns_from_prices",
    "slice_sample",
    "detect_segment",
    "binary_segment",
    "read_price_csv",
    "read_series_csv",
]


class SegmentNotAnalyzable(Exception):
    """A segment on which the detector cannot run (reason in ``.reason``)."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass
class PriceSeries:
    """Positive price observations; labels are opaque (only order matters)."""

    prices: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.prices = np.asarray(self.prices, dtype=np.float64)
        if self.prices.ndim != 1 or self.prices.size < 3:
            raise ValueError("need at least 3 price observations")
        if not np.all(self.prices > 0.0):
            raise ValueError("prices must be strictly positive")
        if self.labels is not None and len(self.labels) != self.prices.size:
            raise ValueError("labels must match the number of prices")

    def __len__(self) -> int:
        return int(self.prices.size)


@dataclass
class SegmentationConfig:
    """Knobs of the recursive detector.

    ``delta_t`` is the nominal mesh of one observation step (e.g. 1/52 for
    weekly data in years).  ``force_depth > 0`` descends unconditionally to
    that depth regardless of test outcomes (max_depth is ignored then);
    reported changes still require a rejection at ``alpha``.

    ``child_velocity`` controls the detection threshold on sub-segments:
    "reestimate" recomputes the speed from each child's own increments,
    "inherit" reuses the parent's detection speed (the published sequential
    analyses of the classic datasets follow the inherit convention; see the
    data notes).  Per-side velocities and rates reported for each segment are
    always re-estimated from that side's own increments.
    """

    alpha: float = 0.05
    trim: float = 0.05
    min_segment_length: int = 20
    max_depth: int = 3
    force_depth: int = 0
    variant: str = VARIANT_UNWEIGHTED
    delta_t: float = 1.0
    child_velocity: str = "reestimate"

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not 0.0 < self.trim < 0.5:
            raise ValueError(f"trim must lie in (0, 1/2), got {self.trim!r}")
        floor_len = int(math.ceil(2.0 / (1.0 - 2.0 * self.trim)))
        if self.min_segment_length < floor_len:
            raise ValueError(
                f"min_segment_length must be at least {floor_len} for trim "
                f"{self.trim} (trimmed k-range would be empty)"
            )
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.force_depth < 0:
            raise ValueError("force_depth must be >= 0 (0 disables forcing)")
        if self.variant not in (VARIANT_UNWEIGHTED, VARIANT_WEIGHTED):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.delta_t > 0.0:
            raise ValueError(f"delta_t must be positive, got {self.delta_t!r}")
        if self.child_velocity not in ("reestimate", "inherit"):
            raise ValueError(
                f"child_velocity must be 'reestimate' or 'inherit', got {self.child_velocity!r}"
            )

    @property
    def depth_limit(self) -> int:
        return self.force_depth if self.force_depth > 0 else self.max_depth


def returns_from_prices(prices: PriceSeries, delta: float) -> GridSample:
    """Simple returns (W_i - W_{i-1})/W_{i-1} packaged as path increments.

    The returned sample's values are the cumulative sum of the returns with
    X_0 = 0, so ``sample.increments`` are exactly the returns; the velocity is
    left unset, to be estimated per segment.
    """
    p = prices.prices
    returns = np.diff(p) / p[:-1]
    values = np.concatenate([[0.0], np.cumsum(returns)])
    return GridSample(delta=delta, values=values, velocity=None)


def slice_sample(sample: GridSample, start: int, end: int) -> GridSample:
    """Sub-sample covering increments [start, end) (0-based), re-zeroed at X_0."""
    if not (0 <= start < end <= sample.n):
        raise ValueError(f"invalid increment range [{start}, {end}) for n = {sample.n}")
    eta = sample.increments[start:end]
    values = np.concatenate([[0.0], np.cumsum(eta)])
    return GridSample(delta=sample.delta, values=values, velocity=None)


def detect_segment(
    sample: GridSample,
    cfg: SegmentationConfig,
    calibration: LimitQuantiles,
    velocity: float | None = None,
) -> tuple[ChangePointFit, TestResult]:
    """Single-pass detection on one segment.

    The detection speed is, in order of precedence: the ``velocity`` argument
    (used by the recursion in inherit mode), the speed carried by the sample,
    or the mean rescaled increment.  Builds the indicator series, estimates
    the change point over the trimmed k-range and tests the constant-rate
    hypothesis with the full-segment plug-in rate.  Raises
    :class:`SegmentNotAnalyzable` (never crashes) on segments without
    observable switches or with a saturated rate.
    """
    if sample.n < cfg.min_segment_length:
        raise SegmentNotAnalyzable(
            "too-short", f"segment has {sample.n} increments, need {cfg.min_segment_length}"
        )
    try:
        if velocity is None:
            velocity = sample.velocity
        v = velocity if velocity is not None else estimate_velocity(sample)
    except DegeneratePathError as exc:
        raise SegmentNotAnalyzable("degenerate-path", str(exc)) from exc
    y = indicator_series(sample, v)
    try:
        fit = change_point(y, k_range=trimmed_k_range(y.n, cfg.trim))
        test = h0_test(
            y,
            calibration,
            alpha=cfg.alpha,
            trim=cfg.trim,
            variant=cfg.variant,
            profile=fit.profile,
        )
    except NoSwitchError as exc:
        raise SegmentNotAnalyzable("no-switching-events", str(exc)) from exc
    except RateSaturationError as exc:
        raise SegmentNotAnalyzable("rate-saturated", str(exc)) from exc
    fit.v_hat = v
    return fit, test


@dataclass
class Segment:
    """One node of the segmentation tree (global increment coordinates).

    ``lambda_left``/``lambda_right`` (and ``v_left``/``v_right``) are the
    per-side re-estimated speed and rate around the detected change, the
    quantities reported in sequential analyses of real series.  The pooled
    single-speed estimates that back the confidence intervals live in
    ``gamma_left``/``gamma_right`` and the test result.
    """

    start: int
    end: int
    depth: int
    analyzable: bool = True
    reason: str | None = None
    v_hat: float | None = None
    change_index: int | None = None
    theta_hat: float | None = None
    tau_local: float | None = None
    gamma_left: float | None = None
    gamma_right: float | None = None
    v_left: float | None = None
    v_right: float | None = None
    lambda_left: float | None = None
    lambda_right: float | None = None
    test: TestResult | None = None
    ci_tau: TauInterval | None = None
    ci_lambda: LambdaConfidence | None = None
    profile: StatProfile | None = None
    children: list["Segment"] = field(default_factory=list)

    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def significant(self) -> bool:
        return bool(self.test is not None and self.test.reject)

    def to_json_dict(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "depth": self.depth,
            "analyzable": self.analyzable,
            "reason": self.reason,
            "v_hat": self.v_hat,
            "change_index": self.change_index,
            "theta_hat": self.theta_hat,
            "tau_local": self.tau_local,
            "v_left": self.v_left,
            "v_right": self.v_right,
            "lambda_left": self.lambda_left,
            "lambda_right": self.lambda_right,
            "stat": None if self.test is None else self.test.statistic,
            "p_value": None if self.test is None else self.test.p_value,
            "significant": self.significant,
            "ci_tau": None if self.ci_tau is None else self.ci_tau.to_json_dict(),
            "ci_lambda": None if self.ci_lambda is None else self.ci_lambda.to_json_dict(),
        }


@dataclass
class SegmentationReport:
    """Tree of analyzed segments plus the significant change indices."""

    root: Segment
    n: int
    delta: float
    changes: list[int]

    def iter_segments(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def to_json_dict(self, config: SegmentationConfig | None = None) -> dict:
        d = {
            "n": self.n,
            "delta": self.delta,
            "changes": list(self.changes),
            "segments": [s.to_json_dict() for s in self.iter_segments()],
        }
        if config is not None:
            d["config"] = {
                "alpha": config.alpha,
                "trim": config.trim,
                "min_segment_length": config.min_segment_length,
                "max_depth": config.max_depth,
                "force_depth": config.force_depth,
                "variant": config.variant,
                "delta_t": config.delta_t,
            }
        return d


def binary_segment(
    sample: GridSample,
    cfg: SegmentationConfig,
    calibration: LimitQuantiles,
    argmax_quantiles: LimitQuantiles | None = None,
) -> SegmentationReport:
    """Recursive (binary) segmentation of a grid sample.

    Each analyzed segment is split at its detected change index when either
    the test rejects at ``cfg.alpha`` (gated mode) or ``cfg.force_depth``
    demands descent; children must each keep at least
    ``cfg.min_segment_length`` increments.  Velocities are re-estimated on
    every child segment.  Tau confidence intervals are attached when an
    argmax-law table is supplied.
    """
    if argmax_quantiles is not None and argmax_quantiles.law != LAW_ARGMAX:
        raise ValueError("argmax_quantiles must be an argmax-two-sided-bm table")

    def analyze(start: int, end: int, depth: int, seg_sample: GridSample,
                inherited_v: float | None) -> Segment:
        node = Segment(start=start, end=end, depth=depth)
        try:
            fit, test = detect_segment(seg_sample, cfg, calibration, velocity=inherited_v)
        except SegmentNotAnalyzable as exc:
            node.analyzable = False
            node.reason = exc.reason
            return node
        k_local = fit.k_hat
        node.v_hat = fit.v_hat
        node.change_index = start + k_local
        node.theta_hat = (start + k_local) * sample.delta
        node.tau_local = fit.tau_hat
        node.gamma_left = fit.gamma1
        node.gamma_right = fit.gamma2
        side = _side_rates(seg_sample.increments, k_local, sample.delta)
        node.v_left, node.lambda_left, node.v_right, node.lambda_right = side
        node.test = test
        node.profile = fit.profile
        if argmax_quantiles is not None:
            try:
                node.ci_tau = tau_confidence_interval(fit, argmax_quantiles, cfg.alpha)
            except NoRateChangeError:
                node.ci_tau = None
        node.ci_lambda = lambda_confidence(fit, cfg.alpha, fit.n, fit.delta)

        if cfg.force_depth > 0:
            descend = depth < cfg.force_depth
        else:
            descend = test.reject and depth < cfg.max_depth
        if descend:
            m = end - start
            if min(k_local, m - k_local) >= cfg.min_segment_length:
                child_v = fit.v_hat if cfg.child_velocity == "inherit" else None
                node.children = [
                    analyze(start, start + k_local, depth + 1,
                            slice_sample(sample, start, start + k_local), child_v),
                    analyze(start + k_local, end, depth + 1,
                            slice_sample(sample, start + k_local, end), child_v),
                ]
            else:
                node.reason = "children-below-min-segment-length"
        return node

    root = analyze(0, sample.n, 1, sample, None)
    changes = sorted(
        s.change_index
        for s in _walk(root)
        if s.significant and s.change_index is not None
    )
    return SegmentationReport(root=root, n=sample.n, delta=sample.delta, changes=changes)


def _walk(node: Segment):
    yield node
    for child in node.children:
        yield from _walk(child)


def _side_rates(eta: np.ndarray, k: int, delta: float) -> tuple:
    """Re-estimated speed and switching rate on each side of a split.

    Each side gets its own speed (mean rescaled increment) and the rate
    implied by the fraction of its increments below that speed threshold.
    Degenerate or saturated sides yield None entries.
    """
    out = []
    for side in (eta[:k], eta[k:]):
        v = float(np.mean(np.abs(side))) / delta
        if v <= 0.0:
            out.extend([None, None])
            continue
        frac = float(np.mean(np.abs(side) < v * delta * (1.0 - 1e-12)))
        if frac >= 1.0:
            out.extend([v, None])
            continue
        out.extend([v, -math.log1p(-frac) / delta])
    return tuple(out)


# ----------------------------------------------------------------------
# input files
# ----------------------------------------------------------------------

def read_price_csv(path: str | Path) -> PriceSeries:
    """Read a ``date,price`` CSV; dates are kept as opaque labels."""
    path = Path(path)
    labels: list[str] = []
    prices: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "price"]:
            raise ValueError(f"{path}:1: expected header 'date,price', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {row!r}")
            try:
                price = float(row[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed price {row[1]!r}") from exc
            if price <= 0.0:
                raise ValueError(f"{path}:{lineno}: price must be positive, got {price!r}")
            labels.append(row[0])
            prices.append(price)
    return PriceSeries(prices=np.asarray(prices), labels=tuple(labels))


def read_series_csv(path: str | Path) -> np.ndarray:
    """Read the x column of a ``t,x`` CSV (returns or positions)."""
    path = Path(path)
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["t", "x"]:
            raise ValueError(f"{path}:1: expected header 't,x', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {row!r}")
            try:
                values.append(float(row[1]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed value {row[1]!r}") from exc
    return np.asarray(values)
