"""``palletpose`` command line: generate, estimate, evaluate, plot.

Every subcommand exits 0 on success and 1 on error, printing
``error [stage]: message`` to stderr.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .evaluation import evaluate, invert_stream, load_trajectory, plot_horizontal, save_trajectory
from .errors import PalletPoseError
from .geometry import CuboidModel
from .pipeline import (TENSOR_SUFFIX, DatasetSource, PipelineConfig, estimate_dataset, estimate_tensors,
                       successful_samples)
from .synth.annotation import read_camera_settings, read_object_settings
from .synth.config import PRESETS, bundled_config_path
from .synth.generate import CAMERA_SETTINGS, OBJECT_SETTINGS, generate_dataset

log = logging.getLogger("palletpose")


class CommandError(Exception):
    def __init__(self, stage, message):
        super().__init__(message)
        self.stage = stage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"error [usage]: {message}\n")


def _distinct(**paths):
    seen = {}
    for name, p in paths.items():
        if p is None:
            continue
        key = Path(p).resolve()
        if key in seen:
            raise CommandError("config", f"--{seen[key]} and --{name} refer to the same path {p}")
        seen[key] = name.replace("_", "-")


def _load_config(args) -> PipelineConfig:
    path = args.config
    if getattr(args, "preset", None):
        if path:
            raise CommandError("config", "use either --config or --preset, not both")
        path = bundled_config_path(args.preset)
    try:
        cfg = PipelineConfig.load(path)
    except (OSError, ValueError, TypeError) as exc:
        raise CommandError("config", str(exc)) from None
    if path is None and hasattr(args, "preset"):
        cfg = PipelineConfig.load(bundled_config_path("ndds3"))
    return cfg


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    ds = cfg.dataset.with_overrides(seed=args.seed)
    if args.limit is not None and args.limit < 1:
        raise CommandError("config", "--limit must be >= 1")
    try:
        manifest = generate_dataset(ds, args.out, limit=args.limit, workers=args.workers)
    except OSError as exc:
        raise CommandError("io", str(exc)) from None
    print(f"wrote {len(manifest.frames)} frames to {args.out}")
    return 0


def _tensor_context(directory, cfg):
    d = Path(directory)
    k = read_camera_settings(d / CAMERA_SETTINGS) if (d / CAMERA_SETTINGS).exists() else cfg.dataset.intrinsics
    model = (read_object_settings(d / OBJECT_SETTINGS) if (d / OBJECT_SETTINGS).exists()
             else CuboidModel(cfg.dataset.pallet_dimensions))
    return k, model


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    est = cfg.estimate
    overrides = {"period": args.period, "pixel_noise": args.pixel_noise, "dropout": args.dropout,
                 "spurious_peaks": args.spurious_peaks, "seed": args.seed}
    try:
        est = replace(est, **{k: v for k, v in overrides.items() if v is not None})
    except ValueError as exc:
        raise CommandError("config", str(exc)) from None
    cfg = replace(cfg, estimate=est)
    _distinct(input=args.input, out=args.out, ground_truth_out=args.ground_truth_out)

    src_dir = Path(args.input)
    if not src_dir.is_dir():
        raise CommandError("input", f"{src_dir} is not a directory")
    truth = None
    try:
        if any(src_dir.glob(f"*{TENSOR_SUFFIX}")):
            k, model = _tensor_context(src_dir, cfg)
            results = estimate_tensors(src_dir, k, model, cfg, args.limit)
        else:
            src = DatasetSource.open(src_dir)
            results, truth = estimate_dataset(src, cfg, args.limit)
    except FileNotFoundError as exc:
        raise CommandError("input", str(exc)) from None
    except ValueError as exc:
        raise CommandError("input", str(exc)) from None

    for r in results:
        if r.sample is None:
            log.warning("frame %d skipped: %s", r.index, r.reason)
    samples = successful_samples(results)
    try:
        save_trajectory(args.out, samples)
        if args.ground_truth_out:
            if truth is None:
                raise CommandError("input", "--ground-truth-out needs an annotated dataset directory")
            save_trajectory(args.ground_truth_out, truth)
    except OSError as exc:
        raise CommandError("io", str(exc)) from None
    print(f"estimated {len(samples)} of {len(results)} frames -> {args.out}")
    return 0


def _read_pair(args, need_estimate=True):
    try:
        ref = load_trajectory(args.reference)
        est = load_trajectory(args.estimate) if args.estimate else []
    except OSError as exc:
        raise CommandError("load", str(exc)) from None
    except (PalletPoseError, ValueError) as exc:  # parse errors carry file and line
        raise CommandError("load", str(exc)) from None
    if need_estimate and not est:
        raise CommandError("load", f"{args.estimate}: no samples")
    if not ref:
        raise CommandError("load", f"{args.reference}: no samples")
    return ref, est


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    _distinct(reference=args.reference, estimate=args.estimate, report=args.report, plot=args.plot)
    ref, est = _read_pair(args)
    try:
        report = evaluate(ref, est, cfg.eval)
    except Exception as exc:  # noqa: BLE001 - every stage failure maps to exit 1
        raise CommandError("evaluate", f"{type(exc).__name__}: {exc}") from None
    try:
        if args.report:
            Path(args.report).write_text(report.to_json() + "\n")
        if args.plot:
            shown = invert_stream(est) if cfg.eval.invert_estimate else est
            plot_horizontal(ref, shown, args.plot)
    except OSError as exc:
        raise CommandError("io", str(exc)) from None
    print(report.summary())
    return 0


def cmd_plot(args) -> int:
    cfg = _load_config(args)
    _distinct(reference=args.reference, estimate=args.estimate, out=args.out)
    ref, est = _read_pair(args, need_estimate=False)
    if est and cfg.eval.invert_estimate:
        est = invert_stream(est)
    try:
        plot_horizontal(ref, est, args.out)
    except OSError as exc:
        raise CommandError("io", str(exc)) from None
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="palletpose", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="render a synthetic dataset")
    g.add_argument("--config", help="YAML pipeline config (dataset section is used)")
    g.add_argument("--preset", choices=PRESETS, help="bundled dataset preset (default ndds3)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--limit", type=int, help="generate at most N frames")
    g.add_argument("--seed", type=int, help="override the config seed")
    g.add_argument("--workers", type=int, default=1, help="worker processes (output is identical)")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="decode frames and solve PnP into a TUM trajectory")
    e.add_argument("input", help=f"dataset directory, or directory of *{TENSOR_SUFFIX} belief tensors")
    e.add_argument("--out", required=True, help="output trajectory (object-in-camera poses)")
    e.add_argument("--config", help="YAML pipeline config")
    e.add_argument("--ground-truth-out", help="also write camera-in-pallet ground truth from annotations")
    e.add_argument("--limit", type=int, help="process at most N frames")
    e.add_argument("--seed", type=int, help="seed for the injected noise")
    e.add_argument("--period", type=float, help="seconds between frames (default 0.19)")
    e.add_argument("--pixel-noise", type=float, help="Gaussian keypoint noise, px")
    e.add_argument("--dropout", type=float, help="probability a frame is missed")
    e.add_argument("--spurious-peaks", type=int, help="random extra belief peaks per frame")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("evaluate", help="compare an estimate stream with ground truth")
    v.add_argument("--reference", required=True, help="ground-truth trajectory (camera in world)")
    v.add_argument("--estimate", required=True, help="estimated trajectory (object in camera)")
    v.add_argument("--config", help="YAML pipeline config (eval section is used)")
    v.add_argument("--report", help="write the JSON report here")
    v.add_argument("--plot", help="write a top-down SVG plot here")
    v.set_defaults(func=cmd_evaluate)

    q = sub.add_parser("plot", help="top-down SVG of reference and estimate positions")
    q.add_argument("--reference", required=True)
    q.add_argument("--estimate")
    q.add_argument("--config", help="YAML pipeline config (eval.invert_estimate is honoured)")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    except PalletPoseError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
