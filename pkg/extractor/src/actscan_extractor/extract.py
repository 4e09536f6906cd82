"""Training and the extraction job: images in, scanner-ready files out.

A job trains the CNN (or loads a checkpoint), splits the validation set into
disjoint background and evaluation groups, attacks the evaluation images,
and writes bg.acts / clean.acts / adv.acts / layout.json /
attack_report.json. Evaluation clean and adversarial rows are aligned: row i
of adv.acts is the attacked version of row i of clean.acts, and rows whose
attack left the predicted label unchanged are flagged in the report so a
harness can drop them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .acts_io import ActsWriter, write_layout
from .attacks import apply_attack
from .data import TrainingDataUnavailable, load_cifar10, synthetic_images
from .model import LAYER_SIZES, TOTAL_NODES, ActivationCnn, capture_activations

_BATCH = 128


class TrainingDivergedError(Exception):
    pass


@dataclass
class ExtractionJob:
    out_dir: Path
    dataset: str = "cifar10"  # or "synthetic"
    data_dir: Path | None = None
    download: bool = False
    checkpoint: Path | None = None  # skip training when supplied
    save_checkpoint: Path | None = None
    attack: str = "none"  # none | fgsm | bim | cw
    eps: float = 0.0
    bim_steps: int = 10
    n_background: int = 9000
    n_eval: int = 1000
    epochs: int = 30
    batch_size: int = _BATCH
    learning_rate: float = 1e-3
    min_accuracy: float = 0.70
    train_limit: int | None = None  # subsample the training set (smoke runs)
    seed: int = 0

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.dataset not in ("cifar10", "synthetic"):
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.n_background < 1 or self.n_eval < 1:
            raise ValueError("background and eval split sizes must be positive")


def train_model(model, images, labels, job: ExtractionJob) -> None:
    torch.manual_seed(job.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=job.learning_rate)
    model.train()
    n = images.shape[0]
    for epoch in range(job.epochs):
        order = torch.randperm(n)
        for lo in range(0, n, job.batch_size):
            idx = order[lo : lo + job.batch_size]
            optimizer.zero_grad()
            loss = nn.functional.cross_entropy(model(images[idx]), labels[idx])
            loss.backward()
            optimizer.step()


@torch.no_grad()
def accuracy(model, images, labels, batch_size: int = _BATCH) -> float:
    model.eval()
    hits = 0
    for lo in range(0, images.shape[0], batch_size):
        pred = model(images[lo : lo + batch_size]).argmax(dim=1)
        hits += int((pred == labels[lo : lo + batch_size]).sum())
    return hits / images.shape[0]


def _load_data(job: ExtractionJob):
    if job.dataset == "cifar10":
        if job.data_dir is None:
            raise TrainingDataUnavailable("--data-dir is required for cifar10")
        return load_cifar10(job.data_dir, download=job.download)
    needed = job.n_background + job.n_eval
    n_train = job.train_limit or max(4 * needed, 400)
    return synthetic_images(n_train, needed, seed=job.seed)


def _write_activations(path, model, images, batch_size) -> None:
    with ActsWriter(path, images.shape[0], TOTAL_NODES) as writer:
        for lo in range(0, images.shape[0], batch_size):
            rows = capture_activations(model, images[lo : lo + batch_size])
            writer.append(rows.numpy())


def run_extraction(job: ExtractionJob) -> dict:
    """Execute a job end to end; returns the attack report document."""
    (train_images, train_labels), (val_images, val_labels) = _load_data(job)
    if job.train_limit is not None:
        train_images = train_images[: job.train_limit]
        train_labels = train_labels[: job.train_limit]
    if val_images.shape[0] < job.n_background + job.n_eval:
        raise ValueError(
            f"validation split has {val_images.shape[0]} images, need "
            f"{job.n_background} background + {job.n_eval} eval"
        )

    torch.manual_seed(job.seed)
    model = ActivationCnn()
    if job.checkpoint is not None:
        model.load_state_dict(torch.load(job.checkpoint, weights_only=True))
    else:
        train_model(model, train_images, train_labels, job)
        acc = accuracy(model, val_images, val_labels)
        if acc < job.min_accuracy:
            raise TrainingDivergedError(
                f"validation accuracy {acc:.3f} below the {job.min_accuracy} gate"
            )
        if job.save_checkpoint is not None:
            torch.save(model.state_dict(), job.save_checkpoint)
    model.eval()

    # background and evaluation groups are disjoint by construction
    bg_images = val_images[: job.n_background]
    eval_images = val_images[job.n_background : job.n_background + job.n_eval]
    eval_labels = val_labels[job.n_background : job.n_background + job.n_eval]

    adv_images = torch.cat(
        [
            apply_attack(
                model,
                eval_images[lo : lo + job.batch_size],
                job.attack,
                eps=job.eps,
                steps=job.bim_steps,
            )
            for lo in range(0, eval_images.shape[0], job.batch_size)
        ]
    )

    job.out_dir.mkdir(parents=True, exist_ok=True)
    _write_activations(job.out_dir / "bg.acts", model, bg_images, job.batch_size)
    _write_activations(job.out_dir / "clean.acts", model, eval_images, job.batch_size)
    _write_activations(job.out_dir / "adv.acts", model, adv_images, job.batch_size)
    write_layout(job.out_dir / "layout.json", LAYER_SIZES)

    report = _attack_report(model, job, eval_images, adv_images, eval_labels)
    (job.out_dir / "attack_report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


@torch.no_grad()
def _attack_report(model, job, eval_images, adv_images, eval_labels) -> dict:
    rows = []
    failed = 0
    for lo in range(0, eval_images.shape[0], job.batch_size):
        hi = lo + job.batch_size
        base = model(eval_images[lo:hi]).argmax(dim=1)
        adv = model(adv_images[lo:hi]).argmax(dim=1)
        for i in range(base.shape[0]):
            changed = int(base[i]) != int(adv[i])
            if job.attack != "none" and not changed:
                failed += 1
            rows.append(
                {
                    "row": lo + i,
                    "label": int(eval_labels[lo + i]),
                    "clean_pred": int(base[i]),
                    "adv_pred": int(adv[i]),
                    "attack_success": changed,
                }
            )
    n = len(rows)
    return {
        "attack": job.attack,
        "eps": job.eps,
        "bim_steps": job.bim_steps if job.attack == "bim" else None,
        "n_eval": n,
        "n_failed": failed,
        "failure_rate": failed / n if job.attack != "none" else None,
        "rows": rows,
    }
