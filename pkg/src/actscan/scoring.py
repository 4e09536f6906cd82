"""Node priorities and the Berk-Jones statistic over subset aggregates.

A subset of nodes is summarized by the triple (alpha, n_alpha, n): the
significance threshold, the total probability mass of the subset's p-value
ranges falling below it, and the subset size. The Berk-Jones statistic
compares the observed proportion n_alpha/n against the expected alpha via
Bernoulli KL divergence, one-sided: only an excess of significance scores.

Alternative statistics over the same (alpha, n_alpha, n) aggregates can be
registered in SCORE_FUNCTIONS; only Berk-Jones is implemented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .pvalues import PValueRange, RangeVector

ScoreFunction = Callable[[float, float, float], float]


def priority(range_: PValueRange, alpha: float) -> float:
    """Fraction of a p-value range lying below the threshold alpha.

    (alpha - p_min) / (p_max - p_min), clamped to [0, 1]. This is the
    probability that a p-value drawn uniformly from the range is significant
    at level alpha, and the node's expected contribution to n_alpha.
    """
    g = (alpha - range_.p_min) / (range_.p_max - range_.p_min)
    return min(1.0, max(0.0, g))


def priorities(ranges: RangeVector, alpha: float) -> np.ndarray:
    """Vectorized priority over a full range vector."""
    g = (alpha - ranges.p_min) / (ranges.p_max - ranges.p_min)
    return np.clip(g, 0.0, 1.0)


def kl_bernoulli(x: float, y: float) -> float:
    """KL divergence between Bernoulli(x) and Bernoulli(y), with 0*log(0) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if not 0.0 < y < 1.0:
        raise ValueError(f"y must lie strictly inside (0, 1), got {y}")
    total = 0.0
    if x > 0.0:
        total += x * math.log(x / y)
    if x < 1.0:
        total += (1.0 - x) * math.log((1.0 - x) / (1.0 - y))
    return total


@dataclass(frozen=True)
class SubsetStats:
    """Aggregate statistics of one candidate subset at one threshold."""

    alpha: float
    n_alpha: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.n < 1:
            raise ValueError(f"subset size must be positive, got {self.n}")
        if not 0.0 <= self.n_alpha <= self.n:
            raise ValueError(f"n_alpha={self.n_alpha} outside [0, n={self.n}]")


def berk_jones_statistic(alpha: float, n_alpha: float, n: float) -> float:
    """Berk-Jones score n * KL(n_alpha/n, alpha), one-sided.

    Zero when the observed significant proportion does not exceed alpha;
    anomalies only ever produce an excess of low p-values.
    """
    x = n_alpha / n
    if x <= alpha:
        return 0.0
    return n * kl_bernoulli(x, alpha)


def berk_jones(stats: SubsetStats) -> float:
    return berk_jones_statistic(stats.alpha, stats.n_alpha, stats.n)


def berk_jones_values(alpha: float, n_alpha: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Berk-Jones over arrays of (n_alpha, n) pairs sharing one alpha.

    Matches berk_jones_statistic elementwise; n_alpha/n is clamped to [0, 1]
    to absorb float drift from cumulative sums.
    """
    n_alpha = np.asarray(n_alpha, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    x = np.clip(n_alpha / n, 0.0, 1.0)
    out = np.zeros(np.broadcast(x, n).shape, dtype=np.float64)
    gain = x > alpha  # one-sided; also rules out alpha >= 1
    if not gain.any():
        return out
    xg = x[gain]
    ng = np.broadcast_to(n, out.shape)[gain]
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = xg * np.log(xg / alpha)  # xg > alpha > 0, never 0*log(0)
        rest = np.where(
            xg < 1.0,
            (1.0 - xg) * np.log((1.0 - xg) / (1.0 - alpha)),
            0.0,
        )
    out[gain] = ng * (lead + rest)
    return out


SCORE_FUNCTIONS: dict[str, ScoreFunction] = {
    "berk-jones": berk_jones_statistic,
}
