import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from actscan import NetworkLayout, RangeVector, beat_tie_counts, pvalue_range

settings.register_profile(
    "ci", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")

# Seven-layer demo CNN: the architecture the extractor component trains,
# used here wherever a realistically shaped multi-layer layout is needed.
CNN_LAYERS = (
    ("Conv1", 32768),
    ("Conv2", 28800),
    ("Pool1", 7200),
    ("Conv3", 14400),
    ("Conv4", 10816),
    ("Pool2", 2304),
    ("Flat", 512),
)


@pytest.fixture
def cnn_layout() -> NetworkLayout:
    return NetworkLayout(CNN_LAYERS)


def reference_ranges(bg: np.ndarray, row: np.ndarray, tol: float = 0.0) -> RangeVector:
    """Definitional per-node range computation, used as the slow reference."""
    n_bg = bg.shape[0]
    pairs = []
    for j in range(bg.shape[1]):
        n_beat, n_tie = beat_tie_counts(bg[:, j], row[j], tol)
        pr = pvalue_range(n_beat, n_tie, n_bg)
        pairs.append((pr.p_min, pr.p_max))
    return RangeVector.from_pairs(pairs)


def random_instance(rng, n_nodes, n_background, with_ties=False):
    """Random background matrix and evaluation row, optionally tie-heavy."""
    if with_ties:
        # values on a coarse grid so exact float collisions are common
        bg = rng.integers(-3, 4, size=(n_background, n_nodes)).astype(np.float64) / 2.0
        row = rng.integers(-3, 4, size=n_nodes).astype(np.float64) / 2.0
    else:
        bg = rng.standard_normal((n_background, n_nodes))
        row = rng.standard_normal(n_nodes)
    return bg, row
