"""Fairness and sustainability metrics, plus the two-sample statistics."""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from .config import ContractError

# Effect-size magnitude labels and their lower bounds.
_D_LABELS = ((0.8, "large"), (0.5, "medium"), (0.2, "small"), (0.0, "negligible"))


def gini(values) -> float:
    """Mean absolute pairwise difference over twice the total: 0 equal, 1 unequal.

    An all-zero (or empty) vector counts as perfect equality.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    if np.any(values < 0.0):
        raise ContractError("gini requires non-negative values")
    total = values.sum()
    if total == 0.0:
        return 0.0
    ordered = np.sort(values)
    n = ordered.size
    ranks = np.arange(1, n + 1)
    return float((2.0 * (ranks * ordered).sum() - (n + 1) * total) / (n * total))


def social_welfare(values) -> float:
    return float(np.sum(values))


def min_experience(values) -> float:
    return float(np.min(values))


def robustness(episode_length: int) -> int:
    """Steps the society survived: last-death step index or the step cap."""
    return int(episode_length)


def _u_statistic(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    greater = (a[:, None] > b[None, :]).sum()
    ties = (a[:, None] == b[None, :]).sum()
    return float(greater) + 0.5 * float(ties)


def _exact_p(pooled: np.ndarray, n1: int, u_observed: float) -> float:
    """Two-sided p by enumerating every split of the pooled values."""
    n = len(pooled)
    mu = n1 * (n - n1) / 2.0
    observed_dev = abs(u_observed - mu)
    extreme = 0
    total = 0
    indices = range(n)
    for combo in combinations(indices, n1):
        mask = np.zeros(n, dtype=bool)
        mask[list(combo)] = True
        u = _u_statistic(pooled[mask], pooled[~mask])
        total += 1
        if abs(u - mu) >= observed_dev - 1e-12:
            extreme += 1
    return extreme / total


def _normal_p(pooled: np.ndarray, n1: int, u_observed: float) -> float:
    """Two-sided p via the tie-corrected normal approximation."""
    n = len(pooled)
    n2 = n - n1
    mu = n1 * n2 / 2.0
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(((counts ** 3) - counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return 1.0
    diff = u_observed - mu
    correction = 0.5 * math.copysign(1.0, diff) if diff != 0.0 else 0.0
    z = (diff - correction) / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def mann_whitney_u(sample_a, sample_b) -> tuple[float, float]:
    """Rank-sum U for sample_a with a two-sided p-value.

    Ties contribute half counts to U. The p-value is exact (full split
    enumeration) when both samples have at most 8 values, otherwise a
    tie-corrected normal approximation with continuity correction.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ContractError("mann_whitney_u requires non-empty samples")
    u = _u_statistic(a, b)
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return u, 1.0
    if a.size <= 8 and b.size <= 8:
        p = _exact_p(pooled, a.size, u)
    else:
        p = _normal_p(pooled, a.size, u)
    return u, p


def d_label(d: float) -> str:
    if math.isnan(d):
        return "undefined"
    for bound, label in _D_LABELS:
        if abs(d) >= bound:
            return label
    return "negligible"


def cohens_d_from_stats(mean_a: float, std_a: float, mean_b: float, std_b: float) -> tuple[float, str]:
    """Effect size from summary statistics: |mean gap| over the pooled SD."""
    diff = abs(mean_a - mean_b)
    if diff == 0.0:
        return 0.0, d_label(0.0)
    pooled = math.sqrt((std_a * std_a + std_b * std_b) / 2.0)
    if pooled == 0.0:
        return math.nan, "undefined"
    d = diff / pooled
    return d, d_label(d)


def cohens_d(sample_a, sample_b) -> tuple[float, str]:
    """Effect size from raw samples (sample standard deviations, ddof=1)."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ContractError("cohens_d requires at least two values per sample")
    return cohens_d_from_stats(
        float(a.mean()), float(a.std(ddof=1)), float(b.mean()), float(b.std(ddof=1)))
