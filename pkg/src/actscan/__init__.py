"""Anomalous-input detection for neural networks via subset scanning.

Treats a network's node activations as data: each evaluation input gets a
per-node empirical p-value range against a background of normal activations,
and the most anomalous subset of nodes is found exactly, in log-linear time,
by scoring only the priority-ordered prefixes at each significance threshold.
"""

__version__ = "0.1.0"

from .analysis import (
    DetectionReport,
    RepresentationReport,
    ScoredGroups,
    SynthSpec,
    auc,
    evaluate_detection,
    representation,
    score_batch,
    synthesize,
)
from .oracle import OracleResult, exhaustive_scan
from .pvalues import (
    PValueRange,
    RangeVector,
    beat_tie_counts,
    pvalue_range,
    ranges_for_batch,
    ranges_for_input,
)
from .scan import (
    ScanConfig,
    ScanResult,
    candidate_alphas,
    priority_order,
    scan,
    scan_per_layer,
    score_all_nodes,
)
from .scoring import (
    SubsetStats,
    berk_jones,
    berk_jones_statistic,
    kl_bernoulli,
    priorities,
    priority,
)
from .store import (
    BackgroundActivations,
    DimensionMismatchError,
    EvaluationBatch,
    NetworkLayout,
    StoreError,
    import_csv,
    load_acts,
    load_layout,
    save_acts,
    save_layout,
    single_layer_layout,
)
