"""Evaluation harness: ROC/AUC, per-layer representation, synthetic instances.

Detection quality is reported as AUC only; no score threshold is ever
chosen. The synthetic generator plants a mean-shift anomaly on a seeded
subset of nodes, giving a desk-scale stand-in for real network activations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .pvalues import ranges_for_batch
from .scan import ScanConfig, ScanResult, scan, score_all_nodes
from .store import (
    BackgroundActivations,
    DimensionMismatchError,
    EvaluationBatch,
    NetworkLayout,
    single_layer_layout,
)


@dataclass
class ScoredGroups:
    """Per-input anomalousness scores, split into the two evaluation groups."""

    clean_scores: np.ndarray
    anomalous_scores: np.ndarray

    def __post_init__(self):
        self.clean_scores = np.asarray(self.clean_scores, dtype=np.float64)
        self.anomalous_scores = np.asarray(self.anomalous_scores, dtype=np.float64)
        if self.clean_scores.size == 0 or self.anomalous_scores.size == 0:
            raise ValueError("both score groups must be non-empty")


def auc(groups: ScoredGroups) -> float:
    """Area under the ROC curve via the rank-sum (Mann-Whitney) identity.

    The fraction of (anomalous, clean) pairs where the anomalous input
    outscores the clean one, ties counting one half. 1.0 is perfect
    separation, 0.5 is random guessing.
    """
    a, c = groups.anomalous_scores, groups.clean_scores
    ranks = rankdata(np.concatenate([a, c]))
    u = ranks[: a.size].sum() - a.size * (a.size + 1) / 2
    return float(u / (a.size * c.size))


@dataclass(frozen=True)
class LayerRepresentation:
    name: str
    rep: float
    subset_count: int
    layer_size: int


@dataclass(frozen=True)
class RepresentationReport:
    """How far each layer's share of a subset departs from proportionality.

    rep = (|S intersect L| / |S|) / (|L| / total nodes): 1.0 means the layer
    holds exactly its proportional share of the subset.
    """

    layers: tuple[LayerRepresentation, ...]

    def __getitem__(self, name: str) -> LayerRepresentation:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def weighted_mean(self) -> float:
        total = sum(layer.layer_size for layer in self.layers)
        return sum(l.rep * l.layer_size / total for l in self.layers)


def representation(subset, layout: NetworkLayout) -> RepresentationReport:
    """Per-layer representation of a subset of node indices."""
    nodes = np.asarray(subset, dtype=np.int64)
    if nodes.size == 0:
        raise ValueError("subset must be non-empty")
    if np.unique(nodes).size != nodes.size:
        raise ValueError("subset contains duplicate node indices")
    total = layout.total_nodes
    if nodes.min() < 0 or nodes.max() >= total:
        raise IndexError(f"subset indices outside [0, {total})")
    ends = np.cumsum(layout.sizes)
    owner = np.searchsorted(ends, nodes, side="right")
    counts = np.bincount(owner, minlength=len(layout.layers))
    reports = []
    for k, (name, size) in enumerate(layout.layers):
        share = counts[k] / nodes.size
        rep = share / (size / total)
        reports.append(LayerRepresentation(name, float(rep), int(counts[k]), size))
    return RepresentationReport(tuple(reports))


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a planted-anomaly instance.

    Background and clean rows are i.i.d. standard normal per node; anomalous
    rows additionally shift a seeded subset of ceil(rho * n_nodes) planted
    nodes by delta (negative delta plants a suppression-style anomaly).
    """

    n_nodes: int
    n_background: int
    n_clean_eval: int
    n_anomalous_eval: int
    affected_fraction: float = 0.05
    shift: float = 2.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_nodes", "n_background", "n_clean_eval", "n_anomalous_eval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.affected_fraction <= 1.0:
            raise ValueError(
                f"affected_fraction must lie in (0, 1], got {self.affected_fraction}"
            )

    @property
    def n_planted(self) -> int:
        return math.ceil(self.affected_fraction * self.n_nodes)


@dataclass
class SynthData:
    background: BackgroundActivations
    clean: EvaluationBatch
    anomalous: EvaluationBatch
    planted: np.ndarray
    layout: NetworkLayout


def synthesize(spec: SynthSpec) -> SynthData:
    """Generate a planted-anomaly instance, fully reproducible from the seed.

    Draw order is fixed (planted nodes, background, clean, anomalous) so any
    one seed always produces bit-identical matrices.
    """
    rng = np.random.default_rng(spec.seed)
    planted = np.sort(rng.choice(spec.n_nodes, size=spec.n_planted, replace=False))
    background = rng.standard_normal(
        (spec.n_background, spec.n_nodes), dtype=np.float32
    )
    clean = rng.standard_normal((spec.n_clean_eval, spec.n_nodes), dtype=np.float32)
    anomalous = rng.standard_normal(
        (spec.n_anomalous_eval, spec.n_nodes), dtype=np.float32
    )
    anomalous[:, planted] += np.float32(spec.shift)
    # freeze in place so the (potentially multi-GB) background is not copied
    for arr in (background, clean, anomalous):
        arr.flags.writeable = False
    return SynthData(
        background=BackgroundActivations(background),
        clean=EvaluationBatch(clean, labels=("clean",) * spec.n_clean_eval),
        anomalous=EvaluationBatch(
            anomalous, labels=("anomalous",) * spec.n_anomalous_eval
        ),
        planted=planted,
        layout=single_layer_layout(spec.n_nodes),
    )


def score_batch(
    background: BackgroundActivations,
    batch: EvaluationBatch,
    config: ScanConfig,
    layout: NetworkLayout | None = None,
    all_nodes: bool = False,
    threads: int = 1,
) -> list[ScanResult]:
    """Scan every row of a batch against the background.

    Rows are independent; with threads > 1 they are scored by a worker pool,
    with results in row order either way.
    """
    batch.check_against(background)
    ranges = ranges_for_batch(background, batch.values, config.tie_tolerance)
    runner = score_all_nodes if all_nodes else scan
    if threads <= 1:
        return [runner(r, config, layout) for r in ranges]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: runner(r, config, layout), ranges))


@dataclass
class DetectionReport:
    scan_auc: float
    all_nodes_auc: float
    n_clean: int
    n_anom: int
    scan_groups: ScoredGroups = field(repr=False, default=None)
    all_nodes_groups: ScoredGroups = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "scan_auc": self.scan_auc,
            "all_nodes_auc": self.all_nodes_auc,
            "n_clean": self.n_clean,
            "n_anom": self.n_anom,
        }


def evaluate_detection(
    background: BackgroundActivations,
    clean: EvaluationBatch,
    anomalous: EvaluationBatch,
    config: ScanConfig,
    layout: NetworkLayout | None = None,
    threads: int = 1,
) -> DetectionReport:
    """AUC of the subset-scan score and the all-nodes score on one instance.

    Every evaluation row, clean or anomalous, is scored against the
    background only, never against the other group; the two AUCs then
    measure how well each score separates the groups.
    """
    clean.check_against(background)
    anomalous.check_against(background)
    if clean.n_nodes != anomalous.n_nodes:
        raise DimensionMismatchError(
            f"clean has {clean.n_nodes} nodes, anomalous has {anomalous.n_nodes}"
        )

    def scores(batch, all_nodes):
        results = score_batch(
            background, batch, config, layout, all_nodes=all_nodes, threads=threads
        )
        return np.array([r.score for r in results])

    scan_groups = ScoredGroups(scores(clean, False), scores(anomalous, False))
    all_groups = ScoredGroups(scores(clean, True), scores(anomalous, True))
    return DetectionReport(
        scan_auc=auc(scan_groups),
        all_nodes_auc=auc(all_groups),
        n_clean=clean.n_inputs,
        n_anom=anomalous.n_inputs,
        scan_groups=scan_groups,
        all_nodes_groups=all_groups,
    )
