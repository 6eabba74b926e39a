"""Tests for the constant-rate test, limit-law simulators, and intervals."""

from __future__ import annotations

import math

import numpy as np
import pytest

from telegraph_cpd.estimators import ChangePointFit, IndicatorSeries, indicator_series, lambda_from_gamma
from telegraph_cpd.inference import (
    LAW_ARGMAX,
    LimitQuantiles,
    NoRateChangeError,
    VARIANT_UNWEIGHTED,
    VARIANT_WEIGHTED,
    argmax_location_sample,
    bridge_sup_sample,
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
from telegraph_cpd.mc import simulate_switch_sample


def series(bits, delta=0.01) -> IndicatorSeries:
    return IndicatorSeries(delta=delta, y=np.asarray(bits, dtype=float) / delta)


# ---------------------------------------------------------------------
# trimming
# ---------------------------------------------------------------------

def test_trimmed_k_range_values():
    assert trimmed_k_range(10_000, 0.1) == (1000, 9000)
    assert trimmed_k_range(10, 0.05) == (1, 9)
    assert trimmed_k_range(100, 0.0) == (1, 99)


def test_trimmed_k_range_empty_raises():
    with pytest.raises(ValueError, match="empty"):
        trimmed_k_range(3, 0.45)
    with pytest.raises(ValueError, match="trim"):
        trimmed_k_range(100, 0.5)


# ---------------------------------------------------------------------
# h0 statistic
# ---------------------------------------------------------------------

def test_statistic_zero_when_all_y_equal():
    y = series([1] * 40)
    for variant in (VARIANT_UNWEIGHTED, VARIANT_WEIGHTED):
        assert h0_statistic(y, 2.0, trim=0.1, variant=variant) == pytest.approx(0.0, abs=1e-12)


def test_statistic_hand_formula():
    # independent re-derivation: scale * max|D_k| over the trimmed range
    bits = [0, 1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 0, 0, 1, 1]
    delta, lam0, trim = 0.05, 3.0, 0.1
    y = series(bits, delta=delta)
    n = len(bits)
    s = np.cumsum(bits)
    d = np.array([k / n - s[k - 1] / s[-1] for k in range(1, n)])
    lo, hi = 2, 18
    p0 = 1.0 - math.exp(-lam0 * delta)
    expected = math.sqrt(n * p0 / (1.0 - p0)) * np.max(np.abs(d[lo - 1 : hi]))
    assert h0_statistic(y, lam0, trim=trim) == pytest.approx(expected, rel=1e-12)
    # weighted variant against its own formula
    k = np.arange(1, n)
    mean_l = s[:-1] / k / delta
    mean_r = (s[-1] - s[:-1]) / (n - k) / delta
    v = np.sqrt(k * (n - k)) / n * (mean_r - mean_l)
    expected_w = math.sqrt(n * delta**2 / (p0 * (1 - p0))) * np.max(np.abs(v[lo - 1 : hi]))
    assert h0_statistic(y, lam0, trim=trim, variant=VARIANT_WEIGHTED) == pytest.approx(
        expected_w, rel=1e-12
    )


def test_statistic_validates_inputs():
    y = series([0, 1] * 10)
    with pytest.raises(ValueError, match="lambda0"):
        h0_statistic(y, 0.0)
    with pytest.raises(ValueError, match="trim"):
        h0_statistic(y, 1.0, trim=0.0)
    with pytest.raises(ValueError, match="variant"):
        h0_statistic(y, 1.0, variant="nope")


def test_statistic_distribution_close_to_bridge_law(bridge_table_trim01):
    # small two-sample sanity check; the full-size version is an acceptance test
    rng_seeds = range(200)
    stats = []
    for s in rng_seeds:
        rng = np.random.default_rng(10_000 + s)
        sample = simulate_switch_sample(2.0, v=1.0, delta=0.01, n=2000, rng=rng)
        y = indicator_series(sample, 1.0)
        lam0 = lambda_from_gamma(y.mean_rate(), 0.01)
        stats.append(h0_statistic(y, lam0, trim=0.1))
    stats = np.sort(stats)
    # empirical CDF of the simulated law at each observed statistic
    levels = np.array([1.0 - bridge_table_trim01.p_value(t) for t in stats])
    ks = np.max(np.abs(levels - (np.arange(1, 201) - 0.5) / 200))
    assert ks < 0.15


def test_h0_test_plugin_invariance(bridge_table_trim01):
    rng = np.random.default_rng(5)
    sample = simulate_switch_sample(2.0, v=1.0, delta=0.01, n=4000, rng=rng)
    y = indicator_series(sample, 1.0)
    lam0 = lambda_from_gamma(y.mean_rate(), 0.01)
    auto = h0_test(y, bridge_table_trim01, alpha=0.05, trim=0.1)
    manual = h0_test(y, bridge_table_trim01, alpha=0.05, lambda0=lam0, trim=0.1)
    assert auto.statistic == manual.statistic
    assert auto.reject == manual.reject
    assert auto.lambda0_plugin == pytest.approx(lam0)
    assert auto.reject == (auto.statistic > auto.critical_value)


def test_h0_test_rejects_strong_alternative(bridge_table_trim01):
    rng = np.random.default_rng(6)
    sample = simulate_switch_sample(1.0, 4.0, 0.5, v=1.0, delta=0.01, n=10_000, rng=rng)
    y = indicator_series(sample, 1.0)
    res = h0_test(y, bridge_table_trim01, alpha=0.05, trim=0.1)
    assert res.reject
    assert res.p_value <= 0.01


def test_h0_test_calibration_mismatch_raises(bridge_table_trim01, weighted_table_trim01):
    y = series([0, 1] * 30)
    with pytest.raises(ValueError, match="law"):
        h0_test(y, weighted_table_trim01, trim=0.1)
    with pytest.raises(ValueError, match="trim"):
        h0_test(y, bridge_table_trim01, trim=0.05)


# ---------------------------------------------------------------------
# quantile tables
# ---------------------------------------------------------------------

def test_table_quantiles_monotone_and_interpolated(bridge_table_trim01):
    t = bridge_table_trim01
    qs = [t.quantile(a) for a in (0.1, 0.5, 0.9, 0.95, 0.99)]
    assert all(b >= a for a, b in zip(qs, qs[1:]))
    assert t.quantile(0.925) == pytest.approx(0.5 * (t.quantile(0.92) + t.quantile(0.93)), rel=0.05)


def test_table_p_value_contract(bridge_table_trim01):
    t = bridge_table_trim01
    assert t.p_value(0.0) == 1.0
    assert t.p_value(1e9) == 1.0 / t.replications
    stats = np.linspace(0.2, 3.0, 50)
    ps = [t.p_value(s) for s in stats]
    assert all(b <= a + 1e-12 for a, b in zip(ps, ps[1:]))
    # p-value and quantile are inverse: q(1 - p(x)) ~ x in the bulk
    for x in (0.8, 1.2, 1.6):
        assert t.quantile(1.0 - t.p_value(x)) == pytest.approx(x, rel=1e-3)


def test_table_json_roundtrip(tmp_path, argmax_table):
    path = argmax_table.save(tmp_path / "table.json")
    back = LimitQuantiles.load(path)
    assert back.to_json_dict() == argmax_table.to_json_dict()
    assert back.law == LAW_ARGMAX
    assert back.span == 50.0


def test_table_rejects_nonmonotone_quantiles():
    with pytest.raises(ValueError, match="monotone"):
        LimitQuantiles(law=LAW_ARGMAX, trim=None, grid_size=10, replications=10_000,
                       seed=0, quantiles={0.1: 1.0, 0.9: 0.5})


# ---------------------------------------------------------------------
# bridge supremum simulation
# ---------------------------------------------------------------------

def test_bridge_sample_reproducible_and_worker_independent():
    a = bridge_sup_sample(0.05, VARIANT_UNWEIGHTED, 1024, 4096, seed=7, workers=1)
    b = bridge_sup_sample(0.05, VARIANT_UNWEIGHTED, 1024, 4096, seed=7, workers=2)
    assert np.array_equal(a, b)
    c = bridge_sup_sample(0.05, VARIANT_UNWEIGHTED, 1024, 4096, seed=8)
    assert not np.array_equal(a, c)


def test_untrimmed_bridge_sup_matches_kolmogorov(bridge_untrimmed_table):
    for alpha in (0.9, 0.95, 0.99):
        assert bridge_untrimmed_table.quantile(alpha) == pytest.approx(
            kolmogorov_sup_quantile(alpha), abs=0.03
        )


def test_trimmed_sup_medians_nested(bridge_untrimmed_table, bridge_table_trim005, bridge_table_trim01):
    m0 = bridge_untrimmed_table.quantile(0.5)
    m1 = bridge_table_trim005.quantile(0.5)
    m2 = bridge_table_trim01.quantile(0.5)
    wide = simulate_bridge_sup(0.25, VARIANT_UNWEIGHTED, 1024, 20_000, seed=1234)
    # suprema over nested windows are stochastically ordered; allow MC slack
    assert m1 <= m0 + 0.01
    assert m2 <= m1 + 0.01
    assert wide.quantile(0.5) <= m2 + 0.01


def test_weighted_sup_dominates_unweighted(bridge_table_trim01, weighted_table_trim01):
    # weight (t(1-t))^{-1/2} >= 2 on the trimmed window
    for alpha in (0.5, 0.9, 0.95, 0.99):
        assert weighted_table_trim01.quantile(alpha) > 2.0 * bridge_table_trim01.quantile(alpha) - 0.05


def test_simulate_bridge_sup_validates_sizes():
    with pytest.raises(ValueError, match="grid_size"):
        simulate_bridge_sup(0.05, VARIANT_UNWEIGHTED, grid_size=100, replications=10_000)
    with pytest.raises(ValueError, match="replications"):
        simulate_bridge_sup(0.05, VARIANT_UNWEIGHTED, grid_size=1024, replications=100)
    with pytest.raises(ValueError, match="weighted"):
        bridge_sup_sample(0.0, VARIANT_WEIGHTED, 1024, 10_000, seed=0)


# ---------------------------------------------------------------------
# Kolmogorov series oracle
# ---------------------------------------------------------------------

def test_kolmogorov_cdf_known_values():
    # frozen from the alternating series: K(1.223848)=0.90, K(1.358099)=0.95
    assert kolmogorov_sup_cdf(1.223848) == pytest.approx(0.90, abs=2e-5)
    assert kolmogorov_sup_cdf(1.358099) == pytest.approx(0.95, abs=2e-5)
    assert kolmogorov_sup_cdf(1.627624) == pytest.approx(0.99, abs=2e-5)
    assert kolmogorov_sup_cdf(0.0) == 0.0
    assert kolmogorov_sup_cdf(10.0) == pytest.approx(1.0)


def test_kolmogorov_quantile_frozen_values():
    assert kolmogorov_sup_quantile(0.90) == pytest.approx(1.223848, abs=5e-5)
    assert kolmogorov_sup_quantile(0.95) == pytest.approx(1.358099, abs=5e-5)
    assert kolmogorov_sup_quantile(0.99) == pytest.approx(1.627624, abs=5e-5)


def test_kolmogorov_roundtrip_and_monotone():
    xs = np.linspace(0.4, 2.5, 40)
    cdf = [kolmogorov_sup_cdf(x) for x in xs]
    assert all(b >= a for a, b in zip(cdf, cdf[1:]))
    for a in (0.3, 0.6, 0.9, 0.975):
        assert kolmogorov_sup_cdf(kolmogorov_sup_quantile(a)) == pytest.approx(a, abs=1e-9)


# ---------------------------------------------------------------------
# argmax law
# ---------------------------------------------------------------------

def test_argmax_law_symmetry(argmax_table):
    assert abs(argmax_table.quantile(0.5)) < 0.15
    # symmetric law: q(a) ~ -q(1-a)
    for a in (0.9, 0.95):
        assert argmax_table.quantile(a) == pytest.approx(-argmax_table.quantile(1 - a), abs=0.8)


def test_argmax_side_probabilities():
    locs = argmax_location_sample(40_000, span=50.0, grid_size=2000, seed=3)
    pos = float(np.mean(locs > 0))
    neg = float(np.mean(locs < 0))
    assert abs(pos - 0.5) < 0.015
    assert abs(neg - 0.5) < 0.015


def test_argmax_quantiles_stable_under_span_doubling():
    a = simulate_argmax_law(20_000, span=50.0, grid_size=2000, seed=11)
    b = simulate_argmax_law(20_000, span=100.0, grid_size=4000, seed=12)
    for alpha, tol in ((0.9, 0.8), (0.95, 1.5)):
        assert a.quantile(alpha) == pytest.approx(b.quantile(alpha), abs=tol)


def test_argmax_sample_worker_independent():
    a = argmax_location_sample(2048, span=50.0, grid_size=500, seed=5, workers=1)
    b = argmax_location_sample(2048, span=50.0, grid_size=500, seed=5, workers=2)
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------
# confidence intervals
# ---------------------------------------------------------------------

def _fit(tau_hat=0.5, gamma1=1.0, gamma2=3.0, lambda1=1.0, lambda2=3.0,
         n=20_000, delta=0.01) -> ChangePointFit:
    return ChangePointFit(
        k_hat=int(tau_hat * n), tau_hat=tau_hat, theta_hat=tau_hat * n * delta,
        gamma1=gamma1, gamma2=gamma2, lambda1=lambda1, lambda2=lambda2,
        n=n, delta=delta, profile=None,
    )


def test_tau_interval_width_scales_with_gap(argmax_table):
    narrow = tau_confidence_interval(_fit(gamma1=1.0, gamma2=3.0), argmax_table, 0.10)
    wide = tau_confidence_interval(_fit(gamma1=1.0, gamma2=5.0), argmax_table, 0.10)
    # gap doubled -> width divided by 4
    assert narrow.half_width == pytest.approx(4.0 * wide.half_width, rel=1e-9)


def test_tau_interval_alpha_one_collapses(argmax_table):
    ci = tau_confidence_interval(_fit(), argmax_table, alpha=1.0)
    assert ci.half_width == pytest.approx(0.0, abs=2e-4)
    assert ci.lower == pytest.approx(0.5, abs=2e-4)


def test_tau_interval_no_gap_errors(argmax_table):
    with pytest.raises(NoRateChangeError, match="no estimated rate change"):
        tau_confidence_interval(_fit(gamma1=2.0, gamma2=2.0), argmax_table, 0.1)


def test_tau_interval_clipping(argmax_table):
    ci = tau_confidence_interval(
        _fit(tau_hat=0.01, gamma1=1.0, gamma2=1.5, n=500, delta=0.01), argmax_table, 0.10
    )
    assert ci.lower == 0.0
    assert ci.lower_unclipped < 0.0
    assert ci.upper_unclipped == pytest.approx(0.01 + ci.half_width)


def test_tau_interval_plugin_side(argmax_table):
    left = tau_confidence_interval(_fit(), argmax_table, 0.1, plugin="left")
    right = tau_confidence_interval(_fit(), argmax_table, 0.1, plugin="right")
    assert right.half_width == pytest.approx(3.0 * left.half_width, rel=1e-9)
    assert left.lambda_plugin == 1.0 and right.lambda_plugin == 3.0


def test_tau_interval_requires_argmax_law(bridge_table_trim01):
    with pytest.raises(ValueError, match="argmax"):
        tau_confidence_interval(_fit(), bridge_table_trim01, 0.1)


def test_lambda_confidence_hand_values():
    fit = _fit(tau_hat=0.5, lambda1=2.0, lambda2=2.0)
    ci = lambda_confidence(fit, 0.05, n=20_000, delta=0.01)
    z = 1.959963984540054
    hw = z * math.sqrt(2.0 / (0.5 * 200.0))
    assert ci.left == pytest.approx((2.0 - hw, 2.0 + hw), rel=1e-9)
    # symmetric configuration: both intervals have the same width
    assert (ci.right[1] - ci.right[0]) == pytest.approx(ci.left[1] - ci.left[0], rel=1e-12)


def test_lambda_confidence_asymmetric_tau():
    fit = _fit(tau_hat=0.25, lambda1=1.0, lambda2=1.0)
    ci = lambda_confidence(fit, 0.10, n=10_000, delta=0.01)
    w_left = ci.left[1] - ci.left[0]
    w_right = ci.right[1] - ci.right[0]
    # left segment is shorter (tau = 1/4), so its interval is wider: ratio sqrt(3)
    assert w_left / w_right == pytest.approx(math.sqrt(3.0), rel=1e-9)


def test_power_on_strong_alternative(bridge_table_trim01):
    # rate jump 1 -> 4 at tau = 0.5: essentially certain rejection at 5%
    from telegraph_cpd.estimators import indicator_series as ind
    critical = bridge_table_trim01.quantile(0.95)
    rejections = 0
    reps = 100
    for s in range(reps):
        rng = np.random.default_rng(40_000 + s)
        sample = simulate_switch_sample(1.0, 4.0, 0.5, v=1.0, delta=0.01, n=10_000, rng=rng)
        y = ind(sample, 1.0)
        lam0 = lambda_from_gamma(y.mean_rate(), 0.01)
        rejections += h0_statistic(y, lam0, trim=0.1) > critical
    assert rejections / reps >= 0.99


def test_lambda_confidence_rejects_boundary_tau():
    fit = _fit(tau_hat=1.0)
    with pytest.raises(ValueError, match="strictly inside"):
        lambda_confidence(fit, 0.05, n=100, delta=0.01)
