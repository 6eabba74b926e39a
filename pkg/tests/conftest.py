"""Shared fixtures: small calibration tables reused across test modules."""

from __future__ import annotations

import pytest

from telegraph_cpd.inference import (
    VARIANT_UNWEIGHTED,
    VARIANT_WEIGHTED,
    simulate_argmax_law,
    simulate_bridge_sup,
)


@pytest.fixture(scope="session")
def bridge_table_trim01():
    return simulate_bridge_sup(0.10, VARIANT_UNWEIGHTED, grid_size=1024,
                               replications=20_000, seed=1234)


@pytest.fixture(scope="session")
def bridge_table_trim005():
    return simulate_bridge_sup(0.05, VARIANT_UNWEIGHTED, grid_size=1024,
                               replications=20_000, seed=1234)


@pytest.fixture(scope="session")
def weighted_table_trim01():
    return simulate_bridge_sup(0.10, VARIANT_WEIGHTED, grid_size=1024,
                               replications=20_000, seed=1234)


@pytest.fixture(scope="session")
def bridge_untrimmed_table():
    return simulate_bridge_sup(0.0, VARIANT_UNWEIGHTED, grid_size=1024,
                               replications=20_000, seed=1234)


@pytest.fixture(scope="session")
def argmax_table():
    return simulate_argmax_law(replications=30_000, span=50.0, grid_size=2000, seed=777)
