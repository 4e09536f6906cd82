"""Exact maximization of the subset score over all subsets of nodes.

For every candidate threshold alpha, the highest-scoring subset is a prefix
of the nodes ordered by descending priority, so only linearly many subsets
per alpha need scoring instead of 2^J. The scan sweeps candidates in
ascending order, maintaining the set of nodes whose p-value range straddles
the current alpha (everything else has priority exactly 0 or 1), and takes
the global maximum over (alpha, prefix length).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .pvalues import RangeVector
from .scoring import berk_jones_statistic, berk_jones_values
from .store import LayoutError, NetworkLayout

ALPHA_POLICIES = ("endpoints", "grid")


@dataclass(frozen=True)
class ScanConfig:
    """Knobs shared by every scan entry point.

    alpha_max caps the significance thresholds searched; 1.0 admits very
    large, mildly anomalous subsets, smaller values focus the search on a
    few strongly anomalous nodes. The endpoints policy enumerates the
    distinct range endpoints (where priorities change slope); the grid
    policy uses k evenly spaced thresholds instead.
    """

    alpha_max: float = 1.0
    alpha_policy: str = "endpoints"
    grid_size: int = 100
    layer_restriction: frozenset[str] | None = None
    tie_tolerance: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha_max <= 1.0:
            raise ValueError(f"alpha_max must lie in (0, 1], got {self.alpha_max}")
        if self.alpha_policy not in ALPHA_POLICIES:
            raise ValueError(
                f"alpha_policy must be one of {ALPHA_POLICIES}, got {self.alpha_policy!r}"
            )
        if self.alpha_policy == "grid" and self.grid_size < 2:
            raise ValueError(f"grid_size must be at least 2, got {self.grid_size}")
        if self.tie_tolerance < 0:
            raise ValueError(f"tie_tolerance must be nonnegative, got {self.tie_tolerance}")
        if self.layer_restriction is not None:
            restriction = frozenset(self.layer_restriction)
            if not restriction:
                raise ValueError("layer_restriction must name at least one layer")
            object.__setattr__(self, "layer_restriction", restriction)


@dataclass(frozen=True)
class ScanResult:
    """Maximizing subset with its score, threshold, and aggregates."""

    score: float
    alpha_star: float
    subset: tuple[int, ...]
    n_alpha: float
    n: int

    def __post_init__(self):
        if self.n != len(self.subset):
            raise ValueError(f"n={self.n} but subset has {len(self.subset)} nodes")
        if any(b <= a for a, b in zip(self.subset, self.subset[1:])):
            raise ValueError("subset must be sorted ascending without duplicates")

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "alpha": self.alpha_star,
            "subset_size": self.n,
            "n_alpha": self.n_alpha,
            "nodes": list(self.subset),
        }


def candidate_alphas(ranges: RangeVector, config: ScanConfig) -> np.ndarray:
    """Sorted distinct thresholds searched, all in (0, alpha_max].

    endpoints: the in-scope range endpoints (clipped to (0, alpha_max]) plus
    alpha_max itself; priorities are piecewise linear with breakpoints only
    at endpoints, so these capture every change of the priority ordering.
    grid: {i * alpha_max / k}, i = 1..k. Never empty.
    """
    amax = config.alpha_max
    if config.alpha_policy == "grid":
        k = config.grid_size
        grid = np.arange(1, k + 1, dtype=np.float64) * amax / k
        grid[-1] = amax  # guard the top point against rounding
        return np.unique(grid)
    vals = np.concatenate([ranges.p_min, ranges.p_max])
    vals = vals[(vals > 0.0) & (vals <= amax)]
    return np.unique(np.append(vals, amax))


def priority_order(ranges: RangeVector, alpha: float) -> np.ndarray:
    """Node indices sorted by descending priority at alpha, ties by index."""
    g = np.clip((alpha - ranges.p_min) / (ranges.p_max - ranges.p_min), 0.0, 1.0)
    idx = np.arange(len(ranges))
    return idx[np.lexsort((idx, -g))]


def _eligible_columns(
    ranges: RangeVector, config: ScanConfig, layout: NetworkLayout | None
) -> np.ndarray:
    if layout is not None:
        layout.check_matrix(len(ranges))
    if config.layer_restriction is None:
        return np.arange(len(ranges))
    if layout is None:
        raise ValueError("layer_restriction requires a layout")
    unknown = set(config.layer_restriction) - set(layout.names)
    if unknown:
        raise LayoutError(f"restricted layers not in layout: {sorted(unknown)}")
    return layout.columns_for(config.layer_restriction)


class _AlphaSweep:
    """Shared event structure for one ascending pass over candidate alphas.

    For candidate i, nodes split into three groups: priority exactly 1
    (p_max <= alpha, there are ones[i] of them, a prefix of the by-p_max
    order), fractional (p_min < alpha < p_max, the "active" set), and
    priority 0. Nodes enter the active set at start[j] and leave at end[j].
    """

    def __init__(self, ranges: RangeVector, alphas: np.ndarray):
        self.alphas = alphas
        self.p_min = ranges.p_min
        self.width = ranges.widths
        k = alphas.size
        self.start = np.searchsorted(alphas, ranges.p_min, side="right")
        self.end = np.searchsorted(alphas, ranges.p_max, side="left")
        self.ones = np.cumsum(np.bincount(self.end, minlength=k + 1))[:k]
        spanning = np.nonzero(self.end > self.start)[0]
        order = np.argsort(self.start[spanning], kind="stable")
        self._add_nodes = spanning[order]
        add_keys = self.start[spanning][order]
        self._add_bounds = np.searchsorted(add_keys, np.arange(k + 1))

    def __iter__(self):
        active: set[int] = set()
        for i, alpha in enumerate(self.alphas):
            lo, hi = self._add_bounds[i], self._add_bounds[i + 1]
            for j in self._add_nodes[lo:hi]:
                active.add(int(j))
            active = {j for j in active if self.end[j] > i}
            if active:
                idx = np.sort(np.fromiter(active, dtype=np.int64, count=len(active)))
                frac = (alpha - self.p_min[idx]) / self.width[idx]
            else:
                idx = np.empty(0, dtype=np.int64)
                frac = np.empty(0, dtype=np.float64)
            yield i, float(alpha), int(self.ones[i]), idx, frac


def _best_prefix(alpha, n_ones, idx, frac):
    """Best subset-score prefix at one alpha: (score, size, n_alpha) or None.

    The sorted priority sequence is [1]*n_ones, then the fractional
    priorities descending, then zeros. Zeros never help: appending a
    zero-priority node strictly lowers a positive one-sided score. Within a
    run of equal priorities the score is convex in the prefix length
    (perspective of a convex divergence), so only run boundaries can host
    the maximum; the all-ones block is itself such a run.
    """
    if frac.size:
        order = np.lexsort((idx, -frac))
        gs = frac[order]
        cum = np.cumsum(gs)
        run_ends = np.append(np.nonzero(np.diff(gs))[0], gs.size - 1)
        sizes = n_ones + run_ends + 1
        masses = n_ones + cum[run_ends]
        if n_ones > 0:
            sizes = np.concatenate(([n_ones], sizes))
            masses = np.concatenate(([float(n_ones)], masses))
    elif n_ones > 0:
        sizes = np.array([n_ones])
        masses = np.array([float(n_ones)])
    else:
        return None
    scores = berk_jones_values(alpha, masses, sizes)
    j = int(np.argmax(scores))  # first max: smallest prefix on ties
    return float(scores[j]), int(sizes[j]), float(masses[j])


def scan(
    ranges: RangeVector, config: ScanConfig, layout: NetworkLayout | None = None
) -> ScanResult:
    """Highest-scoring subset of nodes over all candidate alphas.

    Equals the exhaustive maximum over every nonempty (eligible) subset for
    the same candidate-alpha set. With a layer restriction, only columns of
    the named layers are eligible and candidate alphas come from their
    ranges alone. Deterministic: priority ties break by ascending node
    index, score ties by smaller alpha then smaller prefix.
    """
    cols = _eligible_columns(ranges, config, layout)
    if cols.size == 0:
        raise ValueError("no eligible nodes to scan")
    scoped = ranges.take(cols) if cols.size != len(ranges) else ranges
    alphas = candidate_alphas(scoped, config)
    sweep = _AlphaSweep(scoped, alphas)

    best = None  # (score, candidate index, prefix size, n_alpha)
    for i, alpha, n_ones, idx, frac in sweep:
        found = _best_prefix(alpha, n_ones, idx, frac)
        if found is None:
            continue
        score, size, mass = found
        if best is None or score > best[0]:
            best = (score, i, size, mass)

    if best is None:
        # Every node had priority 0 at every candidate; any single node is a
        # maximizer with score 0.
        alpha = float(alphas[-1])
        return ScanResult(0.0, alpha, (int(cols[0]),), 0.0, 1)

    score, i_star, size, mass = best
    alpha_star = float(alphas[i_star])
    ones_pos = np.nonzero(sweep.end <= i_star)[0]
    take = size - ones_pos.size
    if take > 0:
        active = np.nonzero((sweep.start <= i_star) & (sweep.end > i_star))[0]
        frac = (alpha_star - sweep.p_min[active]) / sweep.width[active]
        order = np.lexsort((active, -frac))
        members = np.concatenate([ones_pos, active[order[:take]]])
    else:
        members = ones_pos
    subset = tuple(int(c) for c in np.sort(cols[members]))
    return ScanResult(score, alpha_star, subset, mass, size)


def score_all_nodes(
    ranges: RangeVector, config: ScanConfig, layout: NetworkLayout | None = None
) -> ScanResult:
    """Score the full (eligible) node set, maximizing over alpha only."""
    cols = _eligible_columns(ranges, config, layout)
    if cols.size == 0:
        raise ValueError("no eligible nodes to score")
    scoped = ranges.take(cols) if cols.size != len(ranges) else ranges
    alphas = candidate_alphas(scoped, config)
    n = len(scoped)

    best_score, best_i, best_mass = -1.0, 0, 0.0
    for i, alpha, n_ones, _idx, frac in _AlphaSweep(scoped, alphas):
        mass = n_ones + float(np.sum(frac))
        score = berk_jones_statistic(alpha, min(mass, float(n)), n)
        if score > best_score:
            best_score, best_i, best_mass = score, i, mass
    subset = tuple(int(c) for c in cols)
    return ScanResult(best_score, float(alphas[best_i]), subset, best_mass, n)


def scan_per_layer(
    ranges: RangeVector, config: ScanConfig, layout: NetworkLayout
) -> dict[str, ScanResult]:
    """Independent single-layer-restricted scans, one per layout layer."""
    layout.check_matrix(len(ranges))
    results = {}
    for name in layout.names:
        layer_config = dataclasses.replace(config, layer_restriction=frozenset({name}))
        results[name] = scan(ranges, layer_config, layout)
    return results
