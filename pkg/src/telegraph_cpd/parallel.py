"""Deterministic chunked execution for seeded Monte Carlo.

Replications are split into fixed-size chunks; chunk i always receives the
i-th child of SeedSequence(seed), so results are bit-identical no matter how
many workers execute the chunks.  Tasks must be module-level callables (they
are pickled when workers > 1).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

import numpy as np

__all__ = ["chunk_counts", "child_seeds", "run_chunked"]


def chunk_counts(total: int, chunk: int) -> list[int]:
    """Split ``total`` replications into fixed chunks (last one may be short)."""
    if total <= 0 or chunk <= 0:
        raise ValueError("total and chunk must be positive")
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def child_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """n independent child SeedSequences, deterministic in (seed, n index)."""
    return np.random.SeedSequence(seed).spawn(n)


def run_chunked(
    task: Callable[[Any], Any],
    specs: Sequence[Any],
    workers: int = 1,
) -> list[Any]:
    """Apply ``task`` to every spec, preserving order.

    With ``workers <= 1`` runs inline; otherwise fans out to a process pool.
    Output is independent of ``workers`` because each spec carries its own
    random stream and results are collected in spec order.
    """
    if workers <= 1:
        return [task(s) for s in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, specs))
