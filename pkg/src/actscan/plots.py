"""Figure rendering for scan reports.

Renders to files only (Agg backend); the CSV/JSON artifacts stay the
canonical outputs and every figure is derived from them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import representation
from .store import NetworkLayout


def score_histogram(path, scores_a, label_a="group A", scores_b=None, label_b="group B"):
    """Overlaid histogram of per-input subset scores for one or two groups."""
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.histogram_bin_edges(
        np.concatenate([scores_a, scores_b]) if scores_b is not None else scores_a,
        bins=40,
    )
    ax.hist(scores_a, bins=bins, alpha=0.6, label=label_a)
    if scores_b is not None:
        ax.hist(scores_b, bins=bins, alpha=0.6, label=label_b)
        ax.legend()
    ax.set_xlabel("subset score")
    ax.set_ylabel("inputs")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def subset_size_histogram(path, sizes_a, label_a="group A", sizes_b=None, label_b="group B"):
    """Histogram of detected-subset sizes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    top = max(max(sizes_a), max(sizes_b) if sizes_b is not None else 1)
    bins = np.histogram_bin_edges(np.arange(top + 1), bins=min(40, top + 1))
    ax.hist(sizes_a, bins=bins, alpha=0.6, label=label_a)
    if sizes_b is not None:
        ax.hist(sizes_b, bins=bins, alpha=0.6, label=label_b)
        ax.legend()
    ax.set_xlabel("subset size")
    ax.set_ylabel("inputs")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def representation_box(path, subsets, layout: NetworkLayout, subsets_b=None,
                       label_a="group A", label_b="group B"):
    """Box plot of per-layer representation across detected subsets.

    A value of 1.0 means the layer holds its proportional share of the
    subset; the dashed line marks that reference.
    """

    def per_layer(subsets_):
        values = {name: [] for name in layout.names}
        for subset in subsets_:
            if not len(subset):
                continue
            report = representation(subset, layout)
            for layer in report.layers:
                values[layer.name].append(layer.rep)
        return values

    groups = [(label_a, per_layer(subsets))]
    if subsets_b is not None:
        groups.append((label_b, per_layer(subsets_b)))

    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(layout.names), 4.2))
    width = 0.35 if len(groups) == 2 else 0.6
    positions = np.arange(len(layout.names), dtype=np.float64)
    for g, (label, values) in enumerate(groups):
        offset = (g - (len(groups) - 1) / 2) * (width + 0.05)
        data = [values[name] or [np.nan] for name in layout.names]
        box = ax.boxplot(
            data,
            positions=positions + offset,
            widths=width,
            patch_artist=True,
            showfliers=False,
        )
        color = f"C{g}"
        for patch in box["boxes"]:
            patch.set_facecolor(color)
            patch.set_alpha(0.6)
        ax.plot([], [], color=color, label=label)
    ax.axhline(1.0, linestyle="--", color="grey", linewidth=1)
    ax.set_xticks(positions)
    ax.set_xticklabels(
        [f"{name}\n({size})" for name, size in layout.layers], fontsize=8
    )
    ax.set_ylabel("representation")
    if len(groups) == 2:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def layer_auc_bars(path, layer_aucs: dict[str, float]):
    """Bar chart of detection AUC per independently scanned layer."""
    names = list(layer_aucs)
    values = [layer_aucs[n] for n in names]
    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(names), 4))
    ax.bar(np.arange(len(names)), values)
    ax.axhline(0.5, linestyle="--", color="grey", linewidth=1)
    ax.set_xticks(np.arange(len(names)))
    ax.set_xticklabels(names, fontsize=8, rotation=30, ha="right")
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.0)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
