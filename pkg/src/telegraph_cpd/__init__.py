"""Change-point inference for the switching rate of a telegraph process.

Simulation of the process, indicator-based least-squares change-point
estimation, hypothesis testing against Brownian-bridge limit laws with
Monte Carlo critical values, confidence intervals, and recursive segmentation
of price series.  The `telegraph-cpd` CLI wraps the full pipeline.
"""

__version__ = "0.1.0"

from .telegraph import (
    EventPath,
    GridSample,
    RateProfile,
    integrate_to_grid,
    simulate_events,
)
from .estimators import (
    ChangePointFit,
    DegeneratePathError,
    IndicatorSeries,
    NoSwitchError,
    RateSaturationError,
    StatProfile,
    change_index,
    change_point,
    estimate_velocity,
    indicator_series,
    lambda_from_gamma,
    stat_profile,
)
from .inference import (
    LAW_ARGMAX,
    LAW_BRIDGE_SUP,
    LAW_WEIGHTED_BRIDGE_SUP,
    LambdaConfidence,
    LimitQuantiles,
    NoRateChangeError,
    TauInterval,
    TestResult,
    VARIANT_UNWEIGHTED,
    VARIANT_WEIGHTED,
    h0_statistic,
    h0_test,
    kolmogorov_sup_cdf,
    kolmogorov_sup_quantile,
    lambda_confidence,
    simulate_argmax_law,
    simulate_bridge_sup,
    tau_confidence_interval,
    trimmed_k_range,
)
from .segmentation import (
    PriceSeries,
    Segment,
    SegmentNotAnalyzable,
    SegmentationConfig,
    SegmentationReport,
    binary_segment,
    detect_segment,
    returns_from_prices,
)
from .mc import simulate_switch_sample

__all__ = [
    "EventPath",
    "GridSample",
    "RateProfile",
    "integrate_to_grid",
    "simulate_events",
    "ChangePointFit",
    "DegeneratePathError",
    "IndicatorSeries",
    "NoSwitchError",
    "RateSaturationError",
    "StatProfile",
    "change_index",
    "change_point",
    "estimate_velocity",
    "indicator_series",
    "lambda_from_gamma",
    "stat_profile",
    "LAW_ARGMAX",
    "LAW_BRIDGE_SUP",
    "LAW_WEIGHTED_BRIDGE_SUP",
    "LambdaConfidence",
    "LimitQuantiles",
    "NoRateChangeError",
    "TauInterval",
    "TestResult",
    "VARIANT_UNWEIGHTED",
    "VARIANT_WEIGHTED",
    "h0_statistic",
    "h0_test",
    "kolmogorov_sup_cdf",
    "kolmogorov_sup_quantile",
    "lambda_confidence",
    "simulate_argmax_law",
    "simulate_bridge_sup",
    "tau_confidence_interval",
    "trimmed_k_range",
    "PriceSeries",
    "Segment",
    "SegmentNotAnalyzable",
    "SegmentationConfig",
    "SegmentationReport",
    "binary_segment",
    "detect_segment",
    "returns_from_prices",
    "simulate_switch_sample",
    "__version__",
]
