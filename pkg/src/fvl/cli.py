"""Command line tying the pipeline together.

Subcommands: generate (scenario files to video directories), pool
(precompute ROI flow features), train, evaluate, predict, gradcheck.
Every run is a pure function of its flags: all randomness flows from
--seed, and --workers only fans work out over threads whose results are
concatenated in input order, so any worker count gives identical bytes.

Exit codes: 0 success, 1 usage, 2 data/format problems, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import BASELINE_DEGREES, fit_extrapolate
from .dataio import (
    generate_scenario,
    read_dataset,
    read_scenario_file,
    read_video_dir,
    windows_from_video,
    write_pooled_table,
    write_video_dir,
)
from .errors import DataFormatError, NumericFailure, ValidationError
from .fvlmodel import (
    VARIANTS,
    ModelConfig,
    gradient_check_model,
    load_model,
    save_model,
    train_model,
)
from .metrics import build_reports, displacement_errors, reports_to_json

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting itself,
    so main() can map them to exit code 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _positive(kind):
    def convert(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return convert


def _build_parser() -> _Parser:
    parser = _Parser(prog="fvl",
                     description="synthetic future-vehicle-localization pipeline")
    sub = parser.add_subparsers(dest="command", metavar="command")

    gen = sub.add_parser(
        "generate", help="render scenario files into video directories")
    gen.add_argument("scenarios", nargs="+",
                     help="scenario description files (key=value text)")
    gen.add_argument("--out", required=True,
                     help="parent directory; each file lands in <out>/<stem>")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--tau", type=_positive(int), default=10,
                     help="observed window recorded in the video meta")
    gen.add_argument("--delta", type=_positive(int), default=10,
                     help="prediction horizon recorded in the video meta")
    gen.set_defaults(func=cmd_generate)

    pool = sub.add_parser(
        "pool", help="precompute pooled ROI flow for every track frame")
    pool.add_argument("--dataset", required=True,
                      help="a video directory or a directory of them")
    pool.add_argument("--roi-expand", type=_positive(float), default=1.5)
    pool.add_argument("--pool-n", type=_positive(int), default=5)
    pool.add_argument("--workers", type=_positive(int), default=1)
    pool.set_defaults(func=cmd_pool)

    train = sub.add_parser("train", help="train a forecaster checkpoint")
    train.add_argument("--dataset", required=True,
                       help="sample JSONL file or video directory tree")
    train.add_argument("--out", required=True, help="checkpoint path")
    train.add_argument("--variant", choices=VARIANTS, default="xoe")
    train.add_argument("--hidden", type=_positive(int), default=64)
    train.add_argument("--embed", type=_positive(int), default=64)
    train.add_argument("--tau", type=_positive(int), default=10)
    train.add_argument("--delta", type=_positive(int), default=10)
    train.add_argument("--epochs", type=int, default=40)
    train.add_argument("--batch", type=_positive(int), default=64)
    train.add_argument("--lr", type=_positive(float), default=5e-4)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--workers", type=_positive(int), default=1)
    train.add_argument("--roi-expand", type=_positive(float), default=1.5)
    train.add_argument("--pool-n", type=_positive(int), default=5)
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser(
        "evaluate", help="score a checkpoint or baseline on a dataset")
    ev.add_argument("model",
                    help="checkpoint path or baseline name "
                         f"({'/'.join(sorted(BASELINE_DEGREES))})")
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--out", help="also write the report as JSON here")
    ev.add_argument("--tau", type=_positive(int), default=10,
                    help="window for baselines (checkpoints carry their own)")
    ev.add_argument("--delta", type=_positive(int), default=10,
                    help="horizon for baselines (checkpoints carry their own)")
    ev.add_argument("--no-split", action="store_true",
                    help="skip the easy/challenging case split")
    ev.add_argument("--workers", type=_positive(int), default=1)
    ev.add_argument("--roi-expand", type=_positive(float), default=1.5)
    ev.add_argument("--pool-n", type=_positive(int), default=5)
    ev.set_defaults(func=cmd_evaluate)

    pred = sub.add_parser(
        "predict", help="write predicted future boxes as JSONL")
    pred.add_argument("model", help="checkpoint path")
    pred.add_argument("ids", nargs="*", type=int,
                      help="sample indices (default: all)")
    pred.add_argument("--dataset", required=True)
    pred.add_argument("--out", help="output path (default: stdout)")
    pred.add_argument("--workers", type=_positive(int), default=1)
    pred.add_argument("--roi-expand", type=_positive(float), default=1.5)
    pred.add_argument("--pool-n", type=_positive(int), default=5)
    pred.set_defaults(func=cmd_predict)

    gc = sub.add_parser(
        "gradcheck",
        help="compare analytic gradients against finite differences")
    gc.add_argument("--variant", choices=VARIANTS, default="xoe")
    gc.add_argument("--hidden", type=_positive(int), default=8)
    gc.add_argument("--embed", type=_positive(int), default=8)
    gc.add_argument("--tau", type=_positive(int), default=3)
    gc.add_argument("--delta", type=_positive(int), default=2)
    gc.add_argument("--pool-n", type=_positive(int), default=5)
    gc.add_argument("--seed", type=int, default=7)
    gc.set_defaults(func=cmd_gradcheck)

    return parser


# --- dataset plumbing -----------------------------------------------------


def _video_dirs(root: Path) -> list[Path]:
    if (root / "meta").exists():
        return [root]
    if not root.is_dir():
        raise DataFormatError(f"{root}: not a dataset file or directory")
    dirs = sorted(p for p in root.iterdir()
                  if p.is_dir() and (p / "meta").exists())
    if not dirs:
        raise DataFormatError(
            f"{root}: no video directories found (nothing with a meta file)")
    return dirs


def _load_samples(dataset, tau, delta, expand, n, workers) -> list:
    """Samples from a JSONL file, a video directory, or a tree of them.

    Videos are windowed in sorted-path order and each worker handles
    whole videos, so the sample list is identical for any worker count.
    """
    path = Path(dataset)
    if path.is_file():
        return read_dataset(path)
    dirs = _video_dirs(path)

    def load(directory):
        video = read_video_dir(directory)
        samples, _ = windows_from_video(video, tau, delta, expand=expand, n=n)
        return samples

    merged: list = []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for chunk in executor.map(load, dirs):
            merged.extend(chunk)
    return merged


def _lattice_size(pooled_dim: int, fallback: int) -> int:
    """Invert pooled_dim = 2 n^2 when possible, else trust the flag."""
    n = int(round(math.sqrt(pooled_dim / 2.0)))
    return n if 2 * n * n == pooled_dim else fallback


# --- subcommands ----------------------------------------------------------


def cmd_generate(args) -> int:
    out_root = Path(args.out)
    for scenario_path in args.scenarios:
        scenario = read_scenario_file(scenario_path)
        video = generate_scenario(scenario, seed=args.seed)
        target = out_root / Path(scenario_path).stem
        write_video_dir(video, target, tau=args.tau, delta=args.delta)
        print(f"wrote {target}")
    return 0


def cmd_pool(args) -> int:
    dirs = _video_dirs(Path(args.dataset))

    def pool_one(directory):
        write_pooled_table(read_video_dir(directory),
                           expand=args.roi_expand, n=args.pool_n)
        return directory

    with ThreadPoolExecutor(max_workers=args.workers) as executor:
        for directory in executor.map(pool_one, dirs):
            print(f"pooled {directory}")
    return 0


def cmd_train(args) -> int:
    config = ModelConfig(variant=args.variant, hidden=args.hidden,
                         embed=args.embed, tau=args.tau, delta=args.delta,
                         pooled_dim=2 * args.pool_n * args.pool_n)
    samples = _load_samples(args.dataset, config.tau, config.delta,
                            args.roi_expand, args.pool_n, args.workers)
    result = train_model(config, samples, epochs=args.epochs,
                         batch_size=args.batch, lr=args.lr, seed=args.seed)
    save_model(args.out, config, result.best_params)
    # repr floats so identical runs produce identical bytes
    rows = ["epoch,train_loss,val_ade"]
    rows += [f"{i},{loss!r},{ade!r}"
             for i, (loss, ade) in enumerate(zip(result.train_losses,
                                                 result.val_ades))]
    curve_path = Path(f"{args.out}.losses.csv")
    curve_path.write_text("\n".join(rows) + "\n")
    print(f"trained {config.variant} on {len(samples)} samples "
          f"({len(result.train_indices)} train / {len(result.val_indices)} "
          f"held out), best epoch {result.best_epoch}")
    print(f"wrote {args.out} and {curve_path}")
    return 0


def cmd_evaluate(args) -> int:
    if args.model in BASELINE_DEGREES:
        forecaster = None
        tau, delta, n = args.tau, args.delta, args.pool_n
    else:
        forecaster = load_model(args.model)
        tau = forecaster.config.tau
        delta = forecaster.config.delta
        n = _lattice_size(forecaster.config.pooled_dim, args.pool_n)
    samples = _load_samples(args.dataset, tau, delta,
                            args.roi_expand, n, args.workers)
    if not samples:
        raise DataFormatError(f"{args.dataset}: no samples to evaluate")

    truths = [np.array([b.as_array() for b in s.future]) for s in samples]
    if forecaster is None:
        degree = BASELINE_DEGREES[args.model]
        predictions = [fit_extrapolate(s.past, degree, delta) for s in samples]
    else:
        predictions = [forecaster.predict(s).pixel_boxes(s.width, s.height)
                       for s in samples]
    references = None
    if not args.no_split:
        references = [
            displacement_errors(fit_extrapolate(s.past, 2, delta), truth)[0]
            for s, truth in zip(samples, truths)]
    reports = build_reports(predictions, truths, reference_fdes=references)
    for case in ("all", "easy", "challenging"):
        if case in reports:
            print(reports[case].row())
    if args.out:
        Path(args.out).write_text(reports_to_json(reports))
        print(f"wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    forecaster = load_model(args.model)
    config = forecaster.config
    samples = _load_samples(args.dataset, config.tau, config.delta,
                            args.roi_expand,
                            _lattice_size(config.pooled_dim, args.pool_n),
                            args.workers)
    ids = args.ids if args.ids else list(range(len(samples)))
    bad = [i for i in ids if not 0 <= i < len(samples)]
    if bad:
        raise ValidationError(
            f"sample ids out of range: {bad} (dataset has {len(samples)})")
    lines = []
    for i in ids:
        sample = samples[i]
        boxes = forecaster.predict(sample).pixel_boxes(sample.width,
                                                       sample.height)
        lines.append(json.dumps(
            {"index": i, "track": sample.track,
             "boxes": [[float(v) for v in row] for row in boxes]},
            separators=(",", ":")))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_gradcheck(args) -> int:
    config = ModelConfig(variant=args.variant, hidden=args.hidden,
                         embed=args.embed, tau=args.tau, delta=args.delta,
                         pooled_dim=2 * args.pool_n * args.pool_n)
    report = gradient_check_model(config, seed=args.seed)
    print(report.summary())
    return 0 if report.passed else 3


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (DataFormatError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
