"""Command line for activation extraction jobs."""

from __future__ import annotations

import argparse
import json
import sys

from .data import TrainingDataUnavailable
from .extract import ExtractionJob, TrainingDivergedError, run_extraction


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actscan-extract",
        description="Train or load the demo CNN, capture hidden-layer "
        "activations for background/clean/attacked image groups, and write "
        "them in the scanner's file formats.",
    )
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--dataset", choices=("cifar10", "synthetic"), default="cifar10")
    parser.add_argument("--data-dir", default=None, help="CIFAR-10 root directory")
    parser.add_argument("--download", action="store_true",
                        help="let torchvision try to download the dataset")
    parser.add_argument("--checkpoint", default=None,
                        help="load model weights instead of training")
    parser.add_argument("--save-checkpoint", default=None)
    parser.add_argument("--attack", choices=("none", "fgsm", "bim", "cw"), default="none")
    parser.add_argument("--eps", type=float, default=0.0,
                        help="max-norm pixel budget in [0,1] space")
    parser.add_argument("--bim-steps", type=int, default=10)
    parser.add_argument("--background", type=int, default=9000,
                        help="validation images reserved as the background group")
    parser.add_argument("--eval", type=int, default=1000, dest="n_eval",
                        help="validation images in each evaluation group")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--min-accuracy", type=float, default=0.70)
    parser.add_argument("--train-limit", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        out_dir=args.out_dir,
        dataset=args.dataset,
        data_dir=args.data_dir,
        download=args.download,
        checkpoint=args.checkpoint,
        save_checkpoint=args.save_checkpoint,
        attack=args.attack,
        eps=args.eps,
        bim_steps=args.bim_steps,
        n_background=args.background,
        n_eval=args.n_eval,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        min_accuracy=args.min_accuracy,
        train_limit=args.train_limit,
        seed=args.seed,
    )
    try:
        report = run_extraction(job)
    except TrainingDataUnavailable as exc:
        print(f"error: dataset: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergedError as exc:
        print(f"error: training: {exc}", file=sys.stderr)
        return 4
    except NotImplementedError as exc:
        print(f"error: attack: {exc}", file=sys.stderr)
        return 2
    summary = {k: v for k, v in report.items() if k != "rows"}
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
