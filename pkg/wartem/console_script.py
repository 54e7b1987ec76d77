import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Dict, List

import numpy as np

from . import __version__
from .checkpoint import load_twin, save_twin
from .config import RunConfig, default_config, load_config, write_provenance
from .evaluation import (
    MODES,
    EvalEntry,
    eval_baseline_nn,
    eval_dl,
    eval_wartem_dl,
    eval_wartem_nn,
    select_best_family,
    table_path,
    write_report,
)
from .exceptions import ArgumentError, EvaluationError, WartemError
from .metrics import EUCLIDEAN, DistanceKind, Metric
from .series import LabeledDataset, format_value, load_ucr_tsv, write_ucr_tsv, znormalize_dataset
from .synthetic import make_warp_benchmark
from .training import multi_seed_train
from .twin import TwinAE, embed_many
from .warping import WarpDirection, WarpFamily, warp_dataset

logger = logging.getLogger(__name__)


def _int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _family_models(text: str):
    family, sep, paths = text.partition("=")
    if not sep or family not in {f.value for f in WarpFamily} or not paths:
        raise argparse.ArgumentTypeError(
            f"expected FAMILY=MODEL[,MODEL...] with FAMILY one of copy, interpolation, mixed; got {text!r}"
        )
    return family, [Path(p) for p in paths.split(",") if p]


def add_config_argument(parser, required: bool = False):
    parser.add_argument(
        "--config",
        type=Path,
        required=required,
        help="Run configuration file ('key = value' lines)."
        + ("" if required else " Defaults apply when omitted."),
    )


def main():
    parser = argparse.ArgumentParser(
        description="WaRTEm: warping-resilient time series embeddings.",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    parser.add_argument(
        "-v", "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "--log-level",
        type=str,
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Set the logging level.",
    )

    subparsers = parser.add_subparsers(
        dest="command", required=True, help="Sub-command to execute"
    )

    # --- 'warp' Subcommand ---
    warp_parser = subparsers.add_parser(
        "warp", help="Apply random window warps to every series of a UCR TSV file."
    )
    warp_parser.add_argument("input", type=Path, help="Input UCR TSV file.")
    warp_parser.add_argument("output", type=Path, help="Output UCR TSV file.")
    warp_parser.add_argument(
        "--direction",
        required=True,
        choices=[d.value for d in WarpDirection],
        help="Warp direction.",
    )
    warp_parser.add_argument(
        "--family",
        required=True,
        choices=[f.value for f in WarpFamily],
        help="Operator family (mixed picks copy or interpolation per warp).",
    )
    warp_parser.add_argument(
        "--count",
        type=int,
        help="Exact number of warps per series (default: random in 0..m/2).",
    )
    warp_parser.add_argument(
        "--max-warps", type=int, help="Upper bound for the random warp count."
    )
    warp_parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0).")

    # --- 'train' Subcommand ---
    train_parser = subparsers.add_parser(
        "train", help="Train twin auto-encoders on a UCR TSV file (labels are ignored)."
    )
    train_parser.add_argument("input", type=Path, help="Training UCR TSV file.")
    add_config_argument(train_parser, required=True)
    train_parser.add_argument(
        "--output",
        "-o",
        type=Path,
        required=True,
        help="Model path; with several seeds each file gets a '.seed<N>' suffix.",
    )
    train_parser.add_argument(
        "--seeds", type=_int_list, help="Comma-separated seeds (overrides the config)."
    )
    train_parser.add_argument(
        "--workers", type=int, help="Parallel training processes (default: all cores)."
    )

    # --- 'embed' Subcommand ---
    embed_parser = subparsers.add_parser(
        "embed", help="Write embeddings of every series as CSV (label, then d values)."
    )
    embed_parser.add_argument("input", type=Path, help="Input UCR TSV file.")
    embed_parser.add_argument("output", type=Path, help="Output CSV file.")
    embed_parser.add_argument(
        "--model",
        "-m",
        type=Path,
        action="append",
        required=True,
        help="WARTEM1 model file; repeat for several models (one output file each).",
    )
    add_config_argument(embed_parser)

    # --- 'eval' Subcommand ---
    eval_parser = subparsers.add_parser(
        "eval", help="Run an evaluation protocol and append it to a CSV report."
    )
    eval_parser.add_argument("mode", choices=MODES, help="Evaluation protocol.")
    eval_parser.add_argument("--train", type=Path, required=True, help="Train split (UCR TSV).")
    eval_parser.add_argument("--test", type=Path, required=True, help="Test split (UCR TSV).")
    eval_parser.add_argument(
        "--model",
        "-m",
        type=Path,
        action="append",
        default=[],
        help="WARTEM1 model file (wartem-nn, wartem-dl); repeat for several seeds.",
    )
    eval_parser.add_argument(
        "--family-models",
        type=_family_models,
        action="append",
        default=[],
        help="FAMILY=MODEL[,MODEL...] for wartem-nn family comparison; repeat per family.",
    )
    eval_parser.add_argument(
        "--report", type=Path, default=Path("report.csv"), help="Report CSV (default: report.csv)."
    )
    add_config_argument(eval_parser)

    # --- 'synth' Subcommand ---
    synth_parser = subparsers.add_parser(
        "synth", help="Write the synthetic warped-shape benchmark as <prefix>_TRAIN/_TEST.tsv."
    )
    synth_parser.add_argument("prefix", type=Path, help="Output path prefix.")
    synth_parser.add_argument("--n", type=int, default=200, help="Series count (default: 200).")
    synth_parser.add_argument("--length", type=int, default=64, help="Series length (default: 64).")
    synth_parser.add_argument("--classes", type=int, default=2, help="Class count (default: 2).")
    synth_parser.add_argument(
        "--max-warps", type=int, default=20, help="Most warps per instance (default: 20)."
    )
    synth_parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0).")

    args = parser.parse_args()

    if args.command == "eval" and args.mode in ("wartem-nn", "wartem-dl"):
        if not args.model and not (args.mode == "wartem-nn" and args.family_models):
            parser.error(f"eval {args.mode} requires at least one --model")

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    logger.debug(f"Starting WaRTEm with command: {args.command}")

    handlers = {
        "warp": handle_warp_command,
        "train": handle_train_command,
        "embed": handle_embed_command,
        "eval": handle_eval_command,
        "synth": handle_synth_command,
    }
    try:
        handlers[args.command](args)
    except (WartemError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        sys.exit(1)


def seed_path(path: Path, seed: int) -> Path:
    return path.with_name(f"{path.stem}.seed{seed}{path.suffix}")


def sidecar_path(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}.{tag}")


def _config(args) -> RunConfig:
    return load_config(args.config) if getattr(args, "config", None) else default_config()


def _load_dataset(path: Path, config: RunConfig, label_names=None) -> LabeledDataset:
    dataset = load_ucr_tsv(path, name=config["dataset_name"], label_names=label_names)
    if config["normalize"]:
        dataset = znormalize_dataset(dataset)
    return dataset


def handle_warp_command(args):
    """Handles the 'warp' subcommand."""
    logger.debug(f"Warp command with args: {args}")
    dataset = load_ucr_tsv(args.input)
    rng = np.random.default_rng(args.seed)
    warped = warp_dataset(
        dataset, args.direction, args.family, rng, count=args.count, max_warps=args.max_warps
    )
    write_ucr_tsv(warped, args.output)
    write_provenance(
        sidecar_path(args.output, "provenance.json"),
        default_config(),
        "warp",
        seeds=[args.seed],
        input=str(args.input),
        output=str(args.output),
        direction=args.direction,
        family=args.family,
        count=args.count,
        max_warps=args.max_warps,
    )
    print(f"Warped {warped.n} series -> {args.output}")


def handle_train_command(args):
    """Handles the 'train' subcommand."""
    logger.debug(f"Train command with args: {args}")
    config = load_config(args.config)
    seeds = args.seeds or list(config["seeds"])
    if args.seeds:
        config = config.with_values(seeds=tuple(seeds))
    train_config = config.train_config()
    dataset = _load_dataset(args.input, config)

    workers = args.workers or config["workers"]
    runs = multi_seed_train(dataset, train_config, seeds, workers=workers)

    models = []
    for seed, (twin, history) in zip(seeds, runs):
        model_path = seed_path(args.output, seed) if len(seeds) > 1 else args.output
        save_twin(twin, model_path)
        history.to_csv(sidecar_path(model_path, "history.csv"))
        models.append(str(model_path))
        print(
            f"seed {seed}: best held-out loss {history.best_holdout_loss:.6g} "
            f"at epoch {history.best_epoch} (stopped at {history.stopped_epoch}) -> {model_path}"
        )

    write_provenance(
        sidecar_path(args.output, "provenance.json"),
        config,
        "train",
        seeds=seeds,
        input=str(args.input),
        models=models,
    )


def _write_embeddings(twin: TwinAE, dataset: LabeledDataset, path: Path) -> None:
    if dataset.m != twin.config.input_length:
        raise EvaluationError(
            f"Model expects series of length {twin.config.input_length}, "
            f"{dataset.name!r} has length {dataset.m}"
        )
    vectors = embed_many(twin, dataset.series)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for label, row in zip(dataset.labels, vectors):
            writer.writerow([dataset.label_names[int(label)]] + [format_value(v) for v in row])
    logger.info(f"Wrote {dataset.n} embeddings of length {vectors.shape[1]} to {path}")


def handle_embed_command(args):
    """Handles the 'embed' subcommand."""
    logger.debug(f"Embed command with args: {args}")
    config = _config(args)
    dataset = _load_dataset(args.input, config)

    outputs = []
    for model_path in args.model:
        twin = load_twin(model_path)
        if len(args.model) == 1:
            output = args.output
        else:
            output = args.output.with_name(f"{args.output.stem}.{model_path.stem}{args.output.suffix}")
        _write_embeddings(twin, dataset, output)
        outputs.append(str(output))
        print(f"{model_path} -> {output}")

    write_provenance(
        sidecar_path(args.output, "provenance.json"),
        config,
        "embed",
        seeds=config["seeds"],
        input=str(args.input),
        models=[str(p) for p in args.model],
        outputs=outputs,
    )


def _run_eval(args, config: RunConfig, train, test) -> EvalEntry:
    config_hash = config.config_hash()
    workers = config["workers"]
    if args.mode == "eucl-nn":
        return eval_baseline_nn(train, test, EUCLIDEAN, workers=workers)
    if args.mode == "dtw-nn":
        kind = DistanceKind(Metric.DTW, config["dtw_band"])
        return eval_baseline_nn(train, test, kind, workers=workers)
    if args.mode == "dl":
        return eval_dl(train, test, config.classifier_config(), seed=config["seeds"][0])
    if args.mode == "wartem-dl":
        models = [load_twin(p) for p in args.model]
        return eval_wartem_dl(
            models,
            train,
            test,
            config.classifier_config(),
            seed=config["seeds"][0],
            config_hash=config_hash,
        )
    if args.family_models:
        by_family: Dict[str, EvalEntry] = {}
        for family, paths in args.family_models:
            models = [load_twin(p) for p in paths]
            by_family[family] = eval_wartem_nn(models, train, test, config_hash, workers=workers)
        family, entry = select_best_family(by_family)
        print(", ".join(f"{name}: {e.mean:.2f}" for name, e in by_family.items()) + f" (best: {family})")
        return entry
    models = [load_twin(p) for p in args.model]
    return eval_wartem_nn(models, train, test, config_hash, workers=workers)


def handle_eval_command(args):
    """Handles the 'eval' subcommand."""
    logger.debug(f"Eval command with args: {args}")
    config = _config(args)
    train = _load_dataset(args.train, config)
    # test labels are numbered against the train classes
    test = _load_dataset(args.test, config, label_names=train.label_names)
    if train.m != test.m and args.mode != "dtw-nn":
        raise ArgumentError(f"Train length {train.m} differs from test length {test.m}")

    entry = _run_eval(args, config, train, test)
    entry = dataclasses.replace(
        entry,
        dataset=config["dataset_name"] or test.name,
        config_hash=entry.config_hash or config.config_hash(),
    )
    write_report([entry], args.report, append=True)

    accuracy = f"{entry.mean:.2f}"
    if entry.std is not None:
        accuracy += f" +- {entry.std:.2f}"
    if entry.trial_mean is not None:
        accuracy += f" (mean over trials {entry.trial_mean:.2f})"
    print(f"{entry.method} on {entry.dataset}: {accuracy}")
    print(f"Report: {args.report} ({table_path(args.report)})")

    write_provenance(
        sidecar_path(args.report, f"{args.mode}.provenance.json"),
        config,
        "eval",
        seeds=config["seeds"],
        mode=args.mode,
        train=str(args.train),
        test=str(args.test),
        models=[str(p) for p in args.model],
    )


def handle_synth_command(args):
    """Handles the 'synth' subcommand."""
    logger.debug(f"Synth command with args: {args}")
    train, test = make_warp_benchmark(
        n=args.n,
        m=args.length,
        class_count=args.classes,
        max_warps=args.max_warps,
        seed=args.seed,
    )
    prefix = args.prefix
    train_path = prefix.with_name(f"{prefix.name}_TRAIN.tsv")
    test_path = prefix.with_name(f"{prefix.name}_TEST.tsv")
    write_ucr_tsv(train, train_path)
    write_ucr_tsv(test, test_path)
    write_provenance(
        prefix.with_name(f"{prefix.name}.provenance.json"),
        default_config(),
        "synth",
        seeds=[args.seed],
        n=args.n,
        m=args.length,
        classes=args.classes,
        max_warps=args.max_warps,
        outputs=[str(train_path), str(test_path)],
    )
    print(f"Wrote {train.n} train series to {train_path} and {test.n} test series to {test_path}")


if __name__ == "__main__":
    main()
