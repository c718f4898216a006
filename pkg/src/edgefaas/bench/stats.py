"""Latency statistics and the Mann-Whitney U significance test.

Conventions (documented because they are not the only ones in use):

* median of an even-length sample averages the two middle order statistics;
* MAD is the unscaled median absolute deviation, median(|x - median(x)|),
  with no 1.4826 normal-consistency factor;
* the 95th percentile is nearest-rank: the sorted sample at 1-based index
  ceil(0.95 * n).

The U statistic is U = sum over pairs of [a_i > b_j] + 1/2 [a_i == b_j],
reported as min(U_a, U_b). For n_a + n_b <= 20 the two-sided p-value is
exact over all C(n_a+n_b, n_a) assignments of pooled observations to the
two groups (ties included; the distribution is counted over midrank sums,
which is arithmetically identical to enumerating every assignment).
Larger samples use the normal approximation with tie-corrected variance
and continuity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist


@dataclass(frozen=True)
class StatsSummary:
    n: int
    min: float
    max: float
    mean: float
    mad: float
    p95: float

    def row(self) -> dict:
        return {
            "n": self.n,
            "min_ms": self.min,
            "max_ms": self.max,
            "mean_ms": self.mean,
            "mad_ms": self.mad,
            "p95_ms": self.p95,
        }


def _median_sorted(values: list[float]) -> float:
    n = len(values)
    mid = n // 2
    if n % 2:
        return values[mid]
    return (values[mid - 1] + values[mid]) / 2.0


def nearest_rank(sorted_values: list[float], percentile: int) -> float:
    """Nearest-rank percentile: 1-based index ceil(p/100 * n), integer math."""
    n = len(sorted_values)
    rank = -((-percentile * n) // 100)
    return sorted_values[rank - 1]


def stats(samples: list[float]) -> StatsSummary:
    """Summary statistics of RTT samples in milliseconds."""
    if not samples:
        raise ValueError("stats requires at least one sample")
    ordered = sorted(samples)
    n = len(ordered)
    mean = sum(ordered) / n
    med = _median_sorted(ordered)
    mad = _median_sorted(sorted(abs(x - med) for x in ordered))
    return StatsSummary(n, ordered[0], ordered[-1], mean, mad, nearest_rank(ordered, 95))


# -- Mann-Whitney U ---------------------------------------------------------

EXACT_LIMIT = 20


@dataclass(frozen=True)
class MwuResult:
    u: float
    p_two_sided: float
    method: str  # "exact" | "normal_approx"


def _midranks(pooled: list[float]) -> list[float]:
    """Midranks of the pooled sample, in pooled order. Ties share the mean rank."""
    order = sorted(range(len(pooled)), key=pooled.__getitem__)
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _exact_two_sided(scaled_ranks: list[int], n_a: int, observed_scaled_sum: int) -> float:
    """Two-sided exact p over all assignments, via subset-sum counting.

    dp[k][s] counts size-k subsets of the scaled midranks with sum s; this is
    the full enumeration of rank assignments expressed as a count, so ties
    are handled exactly.
    """
    total_sum = sum(scaled_ranks)
    dp = [[0] * (total_sum + 1) for _ in range(n_a + 1)]
    dp[0][0] = 1
    for r in scaled_ranks:
        for k in range(n_a, 0, -1):
            row_k, row_prev = dp[k], dp[k - 1]
            for s in range(total_sum, r - 1, -1):
                if row_prev[s - r]:
                    row_k[s] += row_prev[s - r]
    counts = dp[n_a]
    total = sum(counts)
    low = sum(counts[: observed_scaled_sum + 1])
    high = sum(counts[observed_scaled_sum:])
    return min(1.0, 2.0 * min(low, high) / total)


def mwu(a: list[float], b: list[float], exact_limit: int = EXACT_LIMIT) -> MwuResult:
    if not a or not b:
        raise ValueError("mwu requires two non-empty samples")
    n_a, n_b = len(a), len(b)
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    rank_sum_a = sum(ranks[:n_a])
    u_a = rank_sum_a - n_a * (n_a + 1) / 2.0
    u_b = n_a * n_b - u_a
    u_min = min(u_a, u_b)

    if n_a + n_b <= exact_limit:
        # midranks are multiples of 1/2; scale by 2 to count over integers
        scaled = [round(2 * r) for r in ranks]
        observed = round(2 * rank_sum_a)
        p = _exact_two_sided(scaled, n_a, observed)
        return MwuResult(u_min, p, "exact")

    n = n_a + n_b
    tie_term = 0.0
    i = 0
    ordered = sorted(pooled)
    while i < n:
        j = i
        while j + 1 < n and ordered[j + 1] == ordered[i]:
            j += 1
        t = j - i + 1
        tie_term += t**3 - t
        i = j + 1
    variance = (n_a * n_b / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:  # all observations identical
        return MwuResult(u_min, 1.0, "normal_approx")
    mean_u = n_a * n_b / 2.0
    z = (u_min - mean_u + 0.5) / math.sqrt(variance)
    p = min(1.0, 2.0 * NormalDist().cdf(z))
    return MwuResult(u_min, p, "normal_approx")
