"""Command-line surface: convert, represent, sif, afcm-demo, eval.

Every command is a deterministic function of its inputs plus the resolved
configuration (flags > ``--config`` JSON file > defaults): reruns produce
byte-identical outputs. All work is sequential; the ``EFK_THREADS``
environment variable is validated and honored as an upper bound, and since
nothing exceeds one worker, results never depend on it. Failures print
``error[CODE]: message`` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from efk import fusion, metrics, tensor_io
from efk.config import RunConfig
from efk.dataset import (
    SplitSpec,
    apply_class_mode,
    build_split,
    filter_small_boxes,
    load_sequence_metadata,
    parse_annotations,
    sequence_of,
)
from efk.errors import ConfigError, EfkError, ShapeError
from efk.events import decode_events, encode_events, window_slice
from efk.representations import (
    TimestampFrame,
    polarity_integration,
    render_png,
    timestamp_frame,
)
from efk.structure import CcConfig, OptConfig, edge_map, fit_sif, trace_csv

__all__ = ["main"]

_EVENT_FORMATS = ("evt1", "csv")


def _thread_cap() -> int:
    """Validate EFK_THREADS; the sequential pipeline honors any cap >= 1."""
    raw = os.environ.get("EFK_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"EFK_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_file(args.config)
    return cfg.override(
        window_ms=getattr(args, "window_ms", None),
        slices=getattr(args, "slices", None),
        omega=getattr(args, "omega", None),
        operator=getattr(args, "operator", None),
        min_diag=getattr(args, "min_diag", None),
        seed=getattr(args, "seed", None),
    )


def _guess_format(path: str, flag: str | None) -> str:
    if flag:
        return flag
    return "csv" if str(path).endswith(".csv") else "evt1"


def _read_events(path: str, fmt: str, width, height):
    data = Path(path).read_bytes()
    if fmt == "csv":
        if width is None or height is None:
            raise ConfigError("csv event input requires --width and --height")
        return decode_events(data, "csv", width=width, height=height)
    return decode_events(data, "evt1")


def _add_config_flags(sub, *names: str) -> None:
    if "window_ms" in names:
        sub.add_argument(
            "--window-ms",
            type=float,
            dest="window_ms",
            help="duration kept from the stream start (default 100)",
        )
    if "slices" in names:
        sub.add_argument("--slices", type=int, help="time-slice count (default 10)")
    if "omega" in names:
        sub.add_argument("--omega", type=int, help="correlation window size (default 9)")
    if "operator" in names:
        sub.add_argument(
            "--operator",
            choices=("sobel", "roberts", "laplace"),
            help="edge operator (default sobel)",
        )
    if "min_diag" in names:
        sub.add_argument(
            "--min-diag",
            type=float,
            dest="min_diag",
            help="ground-truth diagonal floor in pixels (default 30)",
        )
    if "seed" in names:
        sub.add_argument("--seed", type=int, help="generator seed (default 0)")
    sub.add_argument("--config", help="JSON config file (flags win over it)")


def cmd_convert(args, cfg: RunConfig) -> int:
    src_fmt = _guess_format(args.input, getattr(args, "from_format", None))
    dst_fmt = _guess_format(args.out, args.to)
    window = _read_events(args.input, src_fmt, args.width, args.height)
    Path(args.out).write_bytes(encode_events(window, dst_fmt))
    return 0


def cmd_represent(args, cfg: RunConfig) -> int:
    fmt = _guess_format(args.events, args.format)
    window = _read_events(args.events, fmt, args.width, args.height)
    window = window_slice(window, window.t_start, cfg.window_us)

    if args.kind == "timestamp":
        if len(window) == 0:
            tensor = TimestampFrame.zeros(window.height, window.width).data
        else:
            tensor = timestamp_frame(window).data
        mapping = "grayscale"
    else:
        tensor = polarity_integration(window, cfg.slices).data
        mapping = "signed-diverging"

    tensor_io.save_tensor(args.out, tensor)
    if args.png:
        render_png(tensor, mapping, args.png)
    return 0


def cmd_sif(args, cfg: RunConfig) -> int:
    fmt = _guess_format(args.events, args.format)
    window = _read_events(args.events, fmt, args.width, args.height)
    window = window_slice(window, window.t_start, cfg.window_us)

    target = np.asarray(Image.open(args.target).convert("L"), dtype=np.float64) / 255.0
    sup = edge_map(target, cfg.operator)

    if len(window) == 0:
        frame = TimestampFrame.zeros(window.height, window.width)
    else:
        frame = timestamp_frame(window)
    integ = polarity_integration(window, cfg.slices)
    if target.shape != (window.height, window.width):
        raise ShapeError(
            f"target image {target.shape} does not match sensor "
            f"({window.height}, {window.width})"
        )

    opt = OptConfig(
        step_size=args.step_size,
        iterations=args.iterations,
        line_search=not args.no_line_search,
    )
    sif, trace = fit_sif(frame, integ, sup, opt, CcConfig(omega=cfg.omega))
    tensor_io.save_tensor(args.out, sif.data)
    trace_path = args.trace or str(Path(args.out).with_suffix(".trace.csv"))
    Path(trace_path).write_text(trace_csv(trace))
    return 0


def cmd_afcm_demo(args, cfg: RunConfig) -> int:
    rgb = fusion.FeatureMap(data=tensor_io.load_tensor(args.rgb), modality="rgb")
    evt = fusion.FeatureMap(data=tensor_io.load_tensor(args.event), modality="event")
    if args.weights:
        weights = fusion.FusionWeights.load(args.weights)
    else:
        weights = fusion.FusionWeights.random(
            rgb.channels, reduction=args.reduction, seed=cfg.seed
        )
    fused, attn = fusion.afcm(
        rgb, evt, weights, softmax_over=args.softmax_over, return_attention=True
    )
    tensor_io.save_tensor(args.out, fused.data)
    sums = attn.row_sums()
    report = {
        "attention_rows": int(sums.shape[0]),
        "row_sum_max": float(sums.max()),
        "row_sum_mean": float(sums.mean()),
        "row_sum_min": float(sums.min()),
    }
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    gts = parse_annotations(args.gts, vocabulary=None)
    dets = metrics.parse_detections(args.dets)

    spec = SplitSpec(class_mode=args.class_mode, time_mode=args.time_mode)
    if spec.time_mode != "all":
        if not args.metadata:
            raise ConfigError(f"--time-mode {spec.time_mode} requires --metadata")
        sequences = set(build_split(load_sequence_metadata(args.metadata), spec))
        gts = [b for b in gts if sequence_of(b.frame_id) in sequences]
        dets = [d for d in dets if sequence_of(d.frame_id) in sequences]
    gts = apply_class_mode(gts, spec)
    dets = apply_class_mode(dets, spec)
    gts = filter_small_boxes(gts, cfg.min_diag)

    text = json.dumps(metrics.evaluate(dets, gts), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="efk",
        description="Event representations, structure fitting, fusion, and scoring.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("convert", help="re-encode an event file")
    p.add_argument("input")
    p.add_argument("--from", dest="from_format", choices=_EVENT_FORMATS)
    p.add_argument("--to", choices=_EVENT_FORMATS)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, help="sensor width (csv input)")
    p.add_argument("--height", type=int, help="sensor height (csv input)")
    p.add_argument("--config", help="JSON config file (flags win over it)")
    p.set_defaults(func=cmd_convert)

    p = commands.add_parser("represent", help="build a dense tensor from events")
    p.add_argument("events")
    p.add_argument("--kind", choices=("timestamp", "voxel"), required=True)
    p.add_argument("--out", required=True, help="output tensor path")
    p.add_argument("--png", help="optional rendered image path")
    p.add_argument("--format", choices=_EVENT_FORMATS)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    _add_config_flags(p, "window_ms", "slices")
    p.set_defaults(func=cmd_represent)

    p = commands.add_parser("sif", help="fit a structure image against an RGB target")
    p.add_argument("events")
    p.add_argument("target", help="well-exposed grayscale/RGB image file")
    p.add_argument("--out", required=True, help="fitted tensor path")
    p.add_argument("--trace", help="loss-trace CSV path (default: out with .trace.csv)")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--step-size", type=float, default=1e-3, dest="step_size")
    p.add_argument("--no-line-search", action="store_true")
    p.add_argument("--format", choices=_EVENT_FORMATS)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    _add_config_flags(p, "window_ms", "slices", "omega", "operator", "seed")
    p.set_defaults(func=cmd_sif)

    p = commands.add_parser("afcm-demo", help="run the fusion block on saved features")
    p.add_argument("rgb", help="frame-feature tensor (C,H,W)")
    p.add_argument("event", help="event-feature tensor (C,H,W)")
    p.add_argument("--weights", help="weight bundle directory (default: seeded random)")
    p.add_argument("--reduction", type=int, default=2)
    p.add_argument("--softmax-over", choices=("event", "rgb"), default="event")
    p.add_argument("--out", required=True, help="fused tensor path")
    _add_config_flags(p, "seed")
    p.set_defaults(func=cmd_afcm_demo)

    p = commands.add_parser("eval", help="score detections against ground truth")
    p.add_argument("dets", help="detections JSONL")
    p.add_argument("gts", help="ground-truth JSONL")
    p.add_argument("--class-mode", choices=("balanced", "imbalanced"),
                   default="imbalanced", dest="class_mode")
    p.add_argument("--time-mode", choices=("all", "daytime", "nighttime"),
                   default="all", dest="time_mode")
    p.add_argument("--metadata", help="sequence metadata JSON (day/night)")
    p.add_argument("--out", help="result JSON path (default: stdout)")
    _add_config_flags(p, "min_diag")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _thread_cap()
        cfg = _resolve_config(args)
        return args.func(args, cfg)
    except EfkError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error[E_VALUE]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[E_IO]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
