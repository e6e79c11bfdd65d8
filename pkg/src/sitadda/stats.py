"""Paired nonparametric testing and rank correlation.

The signed-rank test is exact (full sign-flip enumeration via a
subset-sum recursion over doubled ranks, so tied average ranks stay
integral) for n <= 25 nonzero differences and uses the tie-corrected
normal approximation beyond that. Two-sided p-values are
2 * min(P(W+ <= w), P(W+ >= w)) capped at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MetricError

EXACT_LIMIT = 25


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    sorted_v = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i: j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_two_sided_p(doubled_ranks: np.ndarray, doubled_w_plus: int) -> float:
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        new = counts.copy()
        new[r:] += counts[: total + 1 - r]
        counts = new
    denom = counts.sum()  # 2^n
    p_le = counts[: doubled_w_plus + 1].sum() / denom
    p_ge = counts[doubled_w_plus:].sum() / denom
    return min(1.0, 2.0 * min(p_le, p_ge))


@dataclass(frozen=True)
class PairedTestResult:
    statistic: float  # signed rank sum W+ - W-
    p_value: float
    p_adjusted: float


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test on paired scores.

    Zero differences are discarded; all-zero differences are degenerate
    and raise rather than returning a fabricated p-value.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError(f"paired scores must be equal-length vectors, got {x.shape} vs {y.shape}")
    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise MetricError("degenerate test: all paired differences are zero")
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = w_plus - w_minus

    if n <= EXACT_LIMIT:
        doubled = np.rint(ranks * 2).astype(np.int64)
        w2 = int(np.rint(doubled[d > 0].sum()))
        p = _exact_two_sided_p(doubled, w2)
    else:
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var -= float(((tie_counts**3 - tie_counts) / 48.0).sum())
        if var <= 0:
            raise MetricError("degenerate test: zero variance under the null")
        z = (w_plus - mean) / math.sqrt(var)
        p = math.erfc(abs(z) / math.sqrt(2.0))
    return statistic, min(1.0, p)


def holm_adjust(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjustment over one declared family."""
    p = np.asarray(p_values, dtype=np.float64)
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m, dtype=np.float64)
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, min(1.0, (m - i) * p[idx]))
        adjusted[idx] = running
    return adjusted.tolist()


def paired_test(a: Sequence[float], b: Sequence[float]) -> PairedTestResult:
    """Single comparison: the adjusted p equals the raw p (family of 1)."""
    statistic, p = wilcoxon_signed_rank(a, b)
    return PairedTestResult(statistic, p, p)


def paired_test_family(
    pairs: dict[str, tuple[Sequence[float], Sequence[float]]]
) -> dict[str, PairedTestResult]:
    """Run one test per entry and Holm-adjust across the whole family."""
    names = list(pairs)
    raw = [wilcoxon_signed_rank(*pairs[name]) for name in names]
    adjusted = holm_adjust([p for _, p in raw])
    return {
        name: PairedTestResult(stat, p, adj)
        for name, (stat, p), adj in zip(names, raw, adjusted)
    }


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation (Pearson on average ranks)."""
    rx = average_ranks(np.asarray(x, dtype=np.float64))
    ry = average_ranks(np.asarray(y, dtype=np.float64))
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    nx = math.sqrt(float(dx @ dx))
    ny = math.sqrt(float(dy @ dy))
    if nx == 0.0 or ny == 0.0:
        raise MetricError("rank correlation undefined: a ranking is constant")
    return float(np.clip((dx @ dy) / (nx * ny), -1.0, 1.0))
