"""Empirical p-value ranges for evaluation activations against a background.

For each node, the background column induces an empirical p-value for an
evaluation activation: the proportion of background activations that exceed
it. Ties and the finite background make the p-value a range rather than a
point:

    p_min = n_beat / (n_background + 1)
    p_max = (n_beat + n_tie + 1) / (n_background + 1)

where n_beat counts background values strictly above the activation and
n_tie counts values within the tie tolerance of it. Large activations are
treated as the extreme direction (one-sided).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .store import BackgroundActivations, DimensionMismatchError

# Background rows are processed in blocks of this many rows so that a scan
# against a multi-GB store never materializes a same-sized temporary.
_BLOCK_ROWS = 1024


@dataclass(frozen=True)
class PValueRange:
    """Empirical p-value interval for one node, 0 <= p_min < p_max <= 1."""

    p_min: float
    p_max: float

    def __post_init__(self):
        if not (0.0 <= self.p_min < self.p_max <= 1.0):
            raise ValueError(f"invalid p-value range ({self.p_min}, {self.p_max})")

    @property
    def width(self) -> float:
        return self.p_max - self.p_min


class RangeVector:
    """Per-node p-value ranges for one evaluation input, in column order."""

    __slots__ = ("p_min", "p_max")

    def __init__(self, p_min, p_max):
        p_min = np.ascontiguousarray(p_min, dtype=np.float64)
        p_max = np.ascontiguousarray(p_max, dtype=np.float64)
        if p_min.ndim != 1 or p_min.shape != p_max.shape:
            raise ValueError(f"mismatched range arrays {p_min.shape} vs {p_max.shape}")
        if p_min.size == 0:
            raise ValueError("empty range vector")
        if not ((p_min >= 0.0).all() and (p_max <= 1.0).all() and (p_min < p_max).all()):
            raise ValueError("ranges must satisfy 0 <= p_min < p_max <= 1")
        self.p_min = p_min
        self.p_max = p_max

    def __len__(self) -> int:
        return self.p_min.size

    def __getitem__(self, node: int) -> PValueRange:
        return PValueRange(float(self.p_min[node]), float(self.p_max[node]))

    @property
    def widths(self) -> np.ndarray:
        return self.p_max - self.p_min

    def take(self, cols) -> "RangeVector":
        """Sub-vector restricted to the given column indices."""
        return RangeVector(self.p_min[cols], self.p_max[cols])

    @classmethod
    def from_pairs(cls, pairs) -> "RangeVector":
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    def to_json_rows(self) -> list[dict]:
        return [
            {"node": j, "pmin": float(self.p_min[j]), "pmax": float(self.p_max[j])}
            for j in range(len(self))
        ]

    @classmethod
    def from_json_rows(cls, rows) -> "RangeVector":
        rows = sorted(rows, key=lambda r: r["node"])
        nodes = [r["node"] for r in rows]
        if nodes != list(range(len(rows))):
            raise ValueError("range rows must cover nodes 0..J-1 exactly once")
        return cls([r["pmin"] for r in rows], [r["pmax"] for r in rows])

    def to_json(self) -> str:
        return json.dumps(self.to_json_rows())


def beat_tie_counts(background_column, activation: float, tie_tolerance: float = 0.0):
    """Count background values beating (strictly above) and tying an activation.

    n_beat = #{v : v > activation + tie_tolerance}
    n_tie  = #{v : |v - activation| <= tie_tolerance}, excluding beats

    With the default tolerance of 0 a tie is exact float equality. (Without
    the exclusion, rounding of `activation + tie_tolerance` could let a value
    count as both beat and tie when tie_tolerance > 0.)
    """
    col = np.asarray(background_column, dtype=np.float64).ravel()
    if col.size == 0:
        raise ValueError("background column is empty")
    if tie_tolerance < 0:
        raise ValueError(f"tie_tolerance must be nonnegative, got {tie_tolerance}")
    a = float(activation)
    threshold = a + tie_tolerance
    beats = col > threshold
    ties = (np.abs(col - a) <= tie_tolerance) & ~beats
    return int(beats.sum()), int(ties.sum())


def pvalue_range(n_beat: int, n_tie: int, n_background: int) -> PValueRange:
    """Turn beat/tie counts into the empirical p-value range."""
    if n_background < 1:
        raise ValueError("need at least one background input")
    if n_beat < 0 or n_tie < 0 or n_beat + n_tie > n_background:
        raise ValueError(
            f"counts ({n_beat}, {n_tie}) inconsistent with |B|={n_background}"
        )
    denom = n_background + 1
    return PValueRange(n_beat / denom, (n_beat + n_tie + 1) / denom)


def _counts_by_block(values: np.ndarray, row: np.ndarray, tie_tolerance: float):
    """Definitional beat/tie counts for one evaluation row, block by block.

    Comparisons run in float32 when they are provably identical to the
    float64 definition (tolerance 0 and a float32-exact row); otherwise each
    block is widened to float64.
    """
    n_cols = values.shape[1]
    n_beat = np.zeros(n_cols, dtype=np.int64)
    n_tie = np.zeros(n_cols, dtype=np.int64)
    row32 = row.astype(np.float32)
    fast = tie_tolerance == 0.0 and np.array_equal(row32.astype(np.float64), row)
    if fast:
        for lo in range(0, values.shape[0], _BLOCK_ROWS):
            blk = values[lo : lo + _BLOCK_ROWS]
            n_beat += (blk > row32).sum(axis=0)
            n_tie += (blk == row32).sum(axis=0)
    else:
        threshold = row + tie_tolerance
        for lo in range(0, values.shape[0], _BLOCK_ROWS):
            blk = values[lo : lo + _BLOCK_ROWS].astype(np.float64)
            beats = blk > threshold
            n_beat += beats.sum(axis=0)
            n_tie += ((np.abs(blk - row) <= tie_tolerance) & ~beats).sum(axis=0)
    return n_beat, n_tie


def ranges_for_input(
    background: BackgroundActivations, input_row, tie_tolerance: float = 0.0
) -> RangeVector:
    """P-value ranges of a single evaluation input against the background."""
    row = np.asarray(input_row, dtype=np.float64).ravel()
    if row.size != background.n_nodes:
        raise DimensionMismatchError(
            f"input has {row.size} nodes, background has {background.n_nodes}"
        )
    if not np.isfinite(row).all():
        raise ValueError("evaluation input contains NaN or Inf entries")
    if tie_tolerance < 0:
        raise ValueError(f"tie_tolerance must be nonnegative, got {tie_tolerance}")
    n_beat, n_tie = _counts_by_block(background.values, row, float(tie_tolerance))
    denom = background.n_backgrounds + 1
    return RangeVector(n_beat / denom, (n_beat + n_tie + 1) / denom)


def _tie_window(col: np.ndarray, a: np.ndarray, tol: float):
    """Index window [lo, hi) of sorted `col` with |col - a| <= tol, per query.

    |v - a| is monotone on either side of a even after float64 rounding, so
    the window is contiguous; searchsorted on a -/+ tol gives a first guess
    that is then nudged until it matches the exact predicate.
    """
    lo = np.searchsorted(col, a - tol, side="left")
    hi = np.searchsorted(col, a + tol, side="right")
    hi = np.maximum(hi, lo)
    n = col.size

    def nudge(bounds, can_move, probe_offset, want_inside, step):
        while True:
            sel = np.nonzero(can_move(bounds))[0]
            if sel.size == 0:
                return
            probed = np.abs(col[bounds[sel] + probe_offset] - a[sel]) <= tol
            sel = sel[probed == want_inside]
            if sel.size == 0:
                return
            bounds[sel] += step

    nudge(lo, lambda b: b > 0, -1, True, -1)            # expand left
    nudge(hi, lambda b: b < n, 0, True, +1)             # expand right
    nudge(lo, lambda b: b < hi, 0, False, +1)           # shrink from the left
    nudge(hi, lambda b: b > lo, -1, False, -1)          # shrink from the right
    return lo, hi


def ranges_for_batch(
    background: BackgroundActivations, values, tie_tolerance: float = 0.0
) -> list[RangeVector]:
    """P-value ranges for every row of an evaluation matrix.

    Uses the background's sorted columns (two binary searches per node and
    row); results are identical to ranges_for_input applied row by row.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[None, :]
    if vals.shape[1] != background.n_nodes:
        raise DimensionMismatchError(
            f"batch has {vals.shape[1]} nodes, background has {background.n_nodes}"
        )
    if not np.isfinite(vals).all():
        raise ValueError("evaluation batch contains NaN or Inf entries")
    if tie_tolerance < 0:
        raise ValueError(f"tie_tolerance must be nonnegative, got {tie_tolerance}")
    tol = float(tie_tolerance)
    n_rows, n_cols = vals.shape
    n_bg = background.n_backgrounds
    srt = background.sorted_columns()
    n_beat = np.empty((n_rows, n_cols), dtype=np.int64)
    n_tie = np.empty((n_rows, n_cols), dtype=np.int64)
    for j in range(n_cols):
        col = srt[:, j].astype(np.float64)
        a = vals[:, j]
        gt = np.searchsorted(col, a + tol, side="right")
        n_beat[:, j] = n_bg - gt
        if tol == 0.0:
            lo = np.searchsorted(col, a, side="left")
            n_tie[:, j] = gt - lo
        else:
            lo, hi = _tie_window(col, a, tol)
            # beats are excluded from the tie count (see beat_tie_counts)
            n_tie[:, j] = np.maximum(np.minimum(hi, gt) - lo, 0)
    denom = n_bg + 1
    return [
        RangeVector(n_beat[i] / denom, (n_beat[i] + n_tie[i] + 1) / denom)
        for i in range(n_rows)
    ]
