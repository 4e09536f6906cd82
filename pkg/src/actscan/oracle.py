"""Brute-force subset maximizer: the ground truth the fast scan is checked against.

Enumerates every nonempty subset of nodes with no pruning or cleverness,
scoring each over the same candidate-alpha set the fast scan uses. Only
feasible for small node counts; refuses anything above MAX_NODES.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pvalues import RangeVector
from .scan import ScanConfig, candidate_alphas
from .scoring import berk_jones_values

MAX_NODES = 25
_CHUNK = 1 << 14


@dataclass(frozen=True)
class OracleResult:
    """Exhaustive maximum with deterministic tie-breaking."""

    score: float
    subset: tuple[int, ...]
    alpha_star: float

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "alpha": self.alpha_star,
            "subset_size": len(self.subset),
            "nodes": list(self.subset),
        }


def exhaustive_scan(ranges: RangeVector, config: ScanConfig) -> OracleResult:
    """Maximize the subset score by enumerating all 2^J - 1 nonempty subsets.

    Ties on score break toward the smaller subset, then the lexicographically
    smaller node list, then the smaller alpha.
    """
    n_nodes = len(ranges)
    if n_nodes > MAX_NODES:
        raise ValueError(f"exhaustive scan capped at {MAX_NODES} nodes, got {n_nodes}")
    alphas = candidate_alphas(ranges, config)
    # priorities[k, j]: node j's priority at candidate k
    priorities = np.clip(
        (alphas[:, None] - ranges.p_min[None, :]) / ranges.widths[None, :], 0.0, 1.0
    )

    best_score = -np.inf
    best_key = None  # (subset size, node tuple)
    best_alpha = None
    bit_values = np.arange(n_nodes)
    for lo in range(1, 2**n_nodes, _CHUNK):
        masks = np.arange(lo, min(lo + _CHUNK, 2**n_nodes), dtype=np.int64)
        bits = ((masks[:, None] >> bit_values) & 1).astype(np.float64)
        sizes = bits.sum(axis=1)
        for k, alpha in enumerate(alphas):
            scores = berk_jones_values(float(alpha), bits @ priorities[k], sizes)
            top = scores.max()
            if top < best_score:
                continue
            tied = np.nonzero(scores == top)[0]
            # reduce the tie set by subset size first so the lexicographic
            # comparison only ever touches a handful of masks
            tied_sizes = sizes[tied]
            tied = tied[tied_sizes == tied_sizes.min()]
            for t in tied:
                nodes = tuple(int(b) for b in np.nonzero(bits[t])[0])
                key = (len(nodes), nodes)
                if (
                    top > best_score
                    or key < best_key
                    or (key == best_key and float(alpha) < best_alpha)
                ):
                    best_score = top
                    best_key = key
                    best_alpha = float(alpha)
    return OracleResult(float(best_score), best_key[1], best_alpha)
