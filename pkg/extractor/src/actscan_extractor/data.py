"""Image datasets: CIFAR-10 from a local directory, or a synthetic stand-in.

Images are float32 in [0,1], shape (N, 3, 32, 32). The synthetic dataset
plants a strong class-dependent spatial pattern so a small model becomes
confidently accurate within a few gradient steps, which makes gradient
attacks meaningful without any real data.
"""

from __future__ import annotations

import numpy as np
import torch


class TrainingDataUnavailable(Exception):
    pass


def load_cifar10(data_dir, download: bool = False):
    """CIFAR-10 train and validation tensors from torchvision files."""
    try:
        from torchvision import datasets
    except ImportError as exc:
        raise TrainingDataUnavailable(
            "torchvision is required for --dataset cifar10"
        ) from exc
    try:
        train = datasets.CIFAR10(root=str(data_dir), train=True, download=download)
        val = datasets.CIFAR10(root=str(data_dir), train=False, download=download)
    except RuntimeError as exc:
        raise TrainingDataUnavailable(f"CIFAR-10 not found in {data_dir}: {exc}") from exc

    def to_tensors(ds):
        images = torch.from_numpy(ds.data).permute(0, 3, 1, 2).float() / 255.0
        labels = torch.tensor(ds.targets, dtype=torch.long)
        return images, labels

    return to_tensors(train), to_tensors(val)


def synthetic_images(
    n_train: int, n_val: int, num_classes: int = 4, seed: int = 0
):
    """Class-patterned random images: pattern[class] scaled into [0,1] + noise.

    Four well-separated classes by default: the full 10-way CIFAR head
    simply never sees the other labels, and the task is easy enough that a
    few dozen gradient steps reach high confidence at any initialization.
    """
    rng = np.random.default_rng(seed)
    patterns = rng.uniform(-1.0, 1.0, size=(num_classes, 3, 32, 32)).astype(np.float32)

    def make(n, offset):
        labels = (np.arange(n) + offset) % num_classes
        noise = rng.uniform(0.0, 1.0, size=(n, 3, 32, 32)).astype(np.float32)
        images = np.clip(0.5 + 0.45 * patterns[labels] + 0.1 * (noise - 0.5), 0.0, 1.0)
        return torch.from_numpy(images), torch.from_numpy(labels).long()

    return make(n_train, 0), make(n_val, 1)
