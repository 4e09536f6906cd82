"""Command-line surface: every pipeline stage as one subcommand.

Outputs are machine-readable (JSON/JSONL/CSV, plus rendered figures on the
report path), written atomically, and accompanied by a run manifest
recording resolved configuration, input/output digests, and timing. All
randomness flows from an explicit --seed; reruns with identical inputs and
seed produce identical artifacts.

Exit codes: 0 success, 2 usage error, 3 unreadable or malformed input file,
4 dimension mismatch between inputs, 5 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ScoredGroups,
    SynthSpec,
    auc,
    evaluate_detection,
    representation,
    synthesize,
)
from .oracle import exhaustive_scan
from .pvalues import RangeVector, ranges_for_batch
from .scan import ALPHA_POLICIES, ScanConfig, scan, score_all_nodes
from .store import (
    BackgroundActivations,
    DimensionMismatchError,
    EvaluationBatch,
    NetworkLayout,
    StoreError,
    _atomic_write_bytes,
    import_csv,
    load_layout,
    save_acts,
    save_layout,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BAD_INPUT = 3
EXIT_DIMENSION = 4
EXIT_INTERNAL = 5


class UsageError(Exception):
    """Arguments are well-formed but semantically unusable."""


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_text(path, text: str) -> None:
    _atomic_write_bytes(path, text.encode())


def _write_manifest(manifest_path, command, config, inputs, outputs, started) -> None:
    doc = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "version": __version__,
        "duration_seconds": time.perf_counter() - started,
    }
    _write_text(manifest_path, json.dumps(doc, indent=2) + "\n")


def _map_rows(fn, n_rows: int, threads: int) -> list:
    """Apply fn to row indices; output order is by row regardless of workers."""
    if threads <= 1:
        return [fn(i) for i in range(n_rows)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_rows)))


def _scan_config(args) -> ScanConfig:
    layers = None
    if getattr(args, "layers", None):
        layers = frozenset(
            name.strip() for name in args.layers.split(",") if name.strip()
        )
    try:
        return ScanConfig(
            alpha_max=args.alpha_max,
            alpha_policy=args.alpha_policy,
            grid_size=args.grid_size,
            layer_restriction=layers,
            tie_tolerance=args.tie_tolerance,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _config_dict(config: ScanConfig, **extra) -> dict:
    doc = {
        "alpha_max": config.alpha_max,
        "alpha_policy": config.alpha_policy,
        "grid_size": config.grid_size,
        "layers": sorted(config.layer_restriction) if config.layer_restriction else None,
        "tie_tolerance": config.tie_tolerance,
    }
    doc.update(extra)
    return doc


def _check_layers(config: ScanConfig, layout: NetworkLayout) -> None:
    if config.layer_restriction:
        unknown = set(config.layer_restriction) - set(layout.names)
        if unknown:
            raise UsageError(f"unknown layers: {sorted(unknown)}")


def _load_ranges_json(path) -> RangeVector:
    try:
        rows = json.loads(Path(path).read_text())
        return RangeVector.from_json_rows(rows)
    except (json.JSONDecodeError, TypeError, KeyError, ValueError) as exc:
        raise StoreError(f"{path}: malformed ranges JSON ({exc})") from exc


def _add_scan_flags(parser) -> None:
    parser.add_argument("--alpha-max", type=float, default=1.0,
                        help="largest significance threshold searched (default 1.0)")
    parser.add_argument("--alpha-policy", choices=ALPHA_POLICIES, default="endpoints",
                        help="candidate thresholds: range endpoints or a uniform grid")
    parser.add_argument("--grid-size", type=int, default=100,
                        help="number of grid thresholds when --alpha-policy grid")
    parser.add_argument("--tie-tolerance", type=float, default=0.0,
                        help="activations this close to a background value count as ties")
    parser.add_argument("--layers", default=None,
                        help="comma-separated layer names to restrict the scan to")


def _per_layer_counts(nodes, layout: NetworkLayout) -> dict[str, int]:
    ends = np.cumsum(layout.sizes)
    owner = np.searchsorted(ends, np.asarray(nodes, dtype=np.int64), side="right")
    counts = np.bincount(owner, minlength=len(layout.layers))
    return {name: int(counts[k]) for k, (name, _) in enumerate(layout.layers)}


# ----------------------------------------------------------------------
# subcommand handlers
# ----------------------------------------------------------------------


def _cmd_pvalues(args) -> int:
    started = time.perf_counter()
    background = BackgroundActivations.from_file(args.background)
    batch = EvaluationBatch.from_file(args.input)
    batch.check_against(background)
    if not 0 <= args.row < batch.n_inputs:
        raise UsageError(f"--row {args.row} outside [0, {batch.n_inputs})")
    if args.tie_tolerance < 0:
        raise UsageError("--tie-tolerance must be nonnegative")
    ranges = ranges_for_batch(
        background, batch.values[args.row], args.tie_tolerance
    )[0]
    _write_text(args.out, ranges.to_json() + "\n")
    _write_manifest(
        str(args.out) + ".manifest.json",
        "pvalues",
        {"row": args.row, "tie_tolerance": args.tie_tolerance},
        [args.background, args.input],
        [args.out],
        started,
    )
    return EXIT_OK


def _cmd_scan(args) -> int:
    started = time.perf_counter()
    background = BackgroundActivations.from_file(args.background)
    layout = load_layout(args.layout)
    batch = EvaluationBatch.from_file(args.input)
    batch.check_against(background)
    layout.check_matrix(background.n_nodes)
    config = _scan_config(args)
    _check_layers(config, layout)
    ranges = ranges_for_batch(background, batch.values, config.tie_tolerance)
    runner = score_all_nodes if args.all_nodes else scan

    def score_row(i: int) -> str:
        result = runner(ranges[i], config, layout)
        doc = {"row": i}
        doc.update(result.to_dict())
        doc["per_layer_counts"] = _per_layer_counts(result.subset, layout)
        return json.dumps(doc)

    lines = _map_rows(score_row, batch.n_inputs, args.threads)
    _write_text(args.out, "\n".join(lines) + "\n")
    _write_manifest(
        str(args.out) + ".manifest.json",
        "scan",
        _config_dict(config, all_nodes=bool(args.all_nodes), threads=args.threads),
        [args.background, args.layout, args.input],
        [args.out],
        started,
    )
    return EXIT_OK


def _cmd_eval_auc(args) -> int:
    started = time.perf_counter()
    background = BackgroundActivations.from_file(args.background)
    layout = load_layout(args.layout)
    clean = EvaluationBatch.from_file(args.clean)
    anom = EvaluationBatch.from_file(args.anom)
    layout.check_matrix(background.n_nodes)
    config = _scan_config(args)
    _check_layers(config, layout)
    report = evaluate_detection(
        background, clean, anom, config, layout, threads=args.threads
    )
    payload = json.dumps(report.to_dict())
    print(payload)
    if args.out:
        _write_text(args.out, payload + "\n")
        _write_manifest(
            str(args.out) + ".manifest.json",
            "eval-auc",
            _config_dict(config),
            [args.background, args.layout, args.clean, args.anom],
            [args.out],
            started,
        )
    return EXIT_OK


def _cmd_represent(args) -> int:
    started = time.perf_counter()
    layout = load_layout(args.layout)
    try:
        rows = [
            json.loads(line)
            for line in Path(args.results).read_text().splitlines()
            if line.strip()
        ]
    except json.JSONDecodeError as exc:
        raise StoreError(f"{args.results}: malformed JSONL ({exc})") from exc
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["input_row", "layer", "rep"])
    for doc in rows:
        report = representation(doc["nodes"], layout)
        for layer in report.layers:
            writer.writerow([doc["row"], layer.name, layer.rep])
    _write_text(args.out, buffer.getvalue())
    _write_manifest(
        str(args.out) + ".manifest.json",
        "represent",
        {},
        [args.results, args.layout],
        [args.out],
        started,
    )
    return EXIT_OK


def _cmd_synth(args) -> int:
    started = time.perf_counter()
    try:
        spec = SynthSpec(
            n_nodes=args.nodes,
            n_background=args.background,
            n_clean_eval=args.clean,
            n_anomalous_eval=args.anom,
            affected_fraction=args.rho,
            shift=args.delta,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    data = synthesize(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_acts(out / "bg.acts", data.background.values)
    save_acts(out / "clean.acts", data.clean.values)
    save_acts(out / "anom.acts", data.anomalous.values)
    save_layout(out / "layout.json", data.layout)
    _write_text(
        out / "planted.json",
        json.dumps(
            {
                "nodes": [int(j) for j in data.planted],
                "rho": spec.affected_fraction,
                "delta": spec.shift,
                "seed": spec.seed,
            }
        )
        + "\n",
    )
    outputs = ["bg.acts", "clean.acts", "anom.acts", "layout.json", "planted.json"]
    _write_manifest(
        out / "manifest.json",
        "synth",
        {
            "nodes": args.nodes,
            "background": args.background,
            "clean": args.clean,
            "anom": args.anom,
            "rho": args.rho,
            "delta": args.delta,
            "seed": args.seed,
        },
        [],
        [out / name for name in outputs],
        started,
    )
    return EXIT_OK


def _cmd_oracle(args) -> int:
    ranges = _load_ranges_json(args.ranges)
    config = _scan_config(args)
    try:
        result = exhaustive_scan(ranges, config)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    payload = json.dumps(result.to_dict())
    print(payload)
    if args.out:
        _write_text(args.out, payload + "\n")
    return EXIT_OK


def _cmd_import_csv(args) -> int:
    started = time.perf_counter()
    values = import_csv(args.csv)
    save_acts(args.out, values)
    _write_manifest(
        str(args.out) + ".manifest.json",
        "import-csv",
        {},
        [args.csv],
        [args.out],
        started,
    )
    return EXIT_OK


def _read_results(path) -> list[dict]:
    try:
        return [
            json.loads(line)
            for line in Path(path).read_text().splitlines()
            if line.strip()
        ]
    except json.JSONDecodeError as exc:
        raise StoreError(f"{path}: malformed JSONL ({exc})") from exc


def _cmd_report(args) -> int:
    from . import plots  # matplotlib import deferred to the one path using it

    started = time.perf_counter()
    layout = load_layout(args.layout)
    group_a = _read_results(args.results)
    group_b = _read_results(args.results_b) if args.results_b else None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def column(rows, key):
        return np.array([doc[key] for doc in rows])

    scores_a = column(group_a, "score")
    scores_b = column(group_b, "score") if group_b else None
    plots.score_histogram(
        out / "score_hist.png", scores_a, args.label_a, scores_b, args.label_b
    )
    plots.subset_size_histogram(
        out / "subset_size_hist.png",
        column(group_a, "subset_size"),
        args.label_a,
        column(group_b, "subset_size") if group_b else None,
        args.label_b,
    )
    plots.representation_box(
        out / "representation_box.png",
        [doc["nodes"] for doc in group_a],
        layout,
        [doc["nodes"] for doc in group_b] if group_b else None,
        args.label_a,
        args.label_b,
    )

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["group", "n", "score_mean", "score_median", "subset_size_mean"])

    def summary_row(label, rows):
        scores = column(rows, "score")
        writer.writerow(
            [
                label,
                len(rows),
                float(np.mean(scores)),
                float(np.median(scores)),
                float(np.mean(column(rows, "subset_size"))),
            ]
        )

    summary_row(args.label_a, group_a)
    if group_b:
        summary_row(args.label_b, group_b)
        writer.writerow(
            [
                f"auc:{args.label_b}>{args.label_a}",
                len(group_a) + len(group_b),
                auc(ScoredGroups(scores_a, scores_b)),
                "",
                "",
            ]
        )
    _write_text(out / "summary.csv", buffer.getvalue())

    figures = ["score_hist.png", "subset_size_hist.png", "representation_box.png"]
    inputs = [args.results, args.layout] + ([args.results_b] if args.results_b else [])
    _write_manifest(
        out / "manifest.json",
        "report",
        {"label_a": args.label_a, "label_b": args.label_b},
        inputs,
        [out / name for name in figures + ["summary.csv"]],
        started,
    )
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actscan",
        description="Detect anomalous inputs to a neural network by scanning "
        "subsets of its node activations against a background of normal ones.",
    )
    parser.add_argument("--version", action="version", version=f"actscan {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("pvalues", help="p-value ranges of one evaluation row")
    p.add_argument("--background", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--tie-tolerance", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pvalues)

    p = sub.add_parser("scan", help="scan every evaluation row for its most "
                                    "anomalous subset of nodes")
    p.add_argument("--background", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--input", required=True)
    _add_scan_flags(p)
    p.add_argument("--all-nodes", action="store_true",
                   help="score the full node set instead of searching subsets")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("eval-auc", help="AUC of subset-scan and all-nodes scores "
                                        "for clean vs anomalous groups")
    p.add_argument("--background", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--anom", required=True)
    _add_scan_flags(p)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval_auc)

    p = sub.add_parser("represent", help="per-layer representation of scan results")
    p.add_argument("--results", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_represent)

    p = sub.add_parser("synth", help="generate a planted-anomaly synthetic instance")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--background", type=int, required=True)
    p.add_argument("--clean", type=int, required=True)
    p.add_argument("--anom", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.05,
                   help="fraction of nodes carrying the planted shift")
    p.add_argument("--delta", type=float, default=2.0,
                   help="activation shift on planted nodes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("oracle", help="exhaustive subset maximum for small "
                                      "p-value range vectors")
    p.add_argument("--ranges", required=True)
    _add_scan_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("import-csv", help="convert a headerless CSV to ACTS")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_import_csv)

    p = sub.add_parser("report", help="render figures and a summary table "
                                      "from scan results")
    p.add_argument("--results", required=True)
    p.add_argument("--results-b", default=None,
                   help="optional second result set to overlay (e.g. anomalous)")
    p.add_argument("--layout", required=True)
    p.add_argument("--label-a", default="group A")
    p.add_argument("--label-b", default="group B")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StoreError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: bad-input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except DimensionMismatchError as exc:
        print(f"error: dimension-mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except Exception as exc:  # noqa: BLE001  internal invariant breach
        print(f"error: internal: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
