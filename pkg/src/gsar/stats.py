"""Paired bootstrap intervals and rank correlation."""

from __future__ import annotations

from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

DEFAULT_RESAMPLES = 1000
DEFAULT_SEED = 42


class BootstrapCI(NamedTuple):
    mean_delta: float
    ci_low: float
    ci_high: float


def resample_indices(n: int, b: int, seed: int) -> np.ndarray:
    """(b, n) matrix of with-replacement indices, fixed by ``seed``."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, n, size=(b, n))


def paired_bootstrap_ci(
    paired_values: Sequence[tuple[float, float]],
    b: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_SEED,
    level: float = 0.95,
) -> BootstrapCI:
    """Percentile interval for mean(variant - default) over resampled pairs."""
    if len(paired_values) == 0:
        raise ValueError("paired_bootstrap_ci needs at least one pair")
    if b < 1:
        raise ValueError(f"b must be positive, got {b}")
    pairs = np.asarray(paired_values, dtype=np.float64).reshape(-1, 2)
    deltas = pairs[:, 1] - pairs[:, 0]
    means = deltas[resample_indices(len(deltas), b, seed)].mean(axis=1)
    tail = (1.0 - level) / 2.0 * 100.0
    lo, hi = np.percentile(means, [tail, 100.0 - tail])
    return BootstrapCI(float(deltas.mean()), float(lo), float(hi))


def spearman_rho(pairs: Sequence[tuple[float, float]]) -> float | None:
    """Rank correlation with average ranks for ties; ``None`` when a side is constant."""
    if len(pairs) < 3:
        raise ValueError("spearman_rho needs at least 3 pairs")
    arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    rx, ry = rankdata(arr[:, 0]), rankdata(arr[:, 1])
    dx, dy = rx - rx.mean(), ry - ry.mean()
    denom = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if denom == 0:
        return None
    return float(np.clip((dx * dy).sum() / denom, -1.0, 1.0))


def spearman_ci(
    pairs: Sequence[tuple[float, float]],
    b: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_SEED,
    level: float = 0.95,
) -> tuple[float | None, float | None, float | None]:
    """Spearman rho with a percentile bootstrap interval over resampled pairs.

    Resamples where one side collapses to a constant are skipped.
    """
    rho = spearman_rho(pairs)
    arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    stats = []
    for idx in resample_indices(len(arr), b, seed):
        r = spearman_rho(arr[idx])
        if r is not None:
            stats.append(r)
    if rho is None or not stats:
        return rho, None, None
    tail = (1.0 - level) / 2.0 * 100.0
    lo, hi = np.percentile(stats, [tail, 100.0 - tail])
    return rho, float(lo), float(hi)
