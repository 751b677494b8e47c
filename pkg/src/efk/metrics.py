"""Detection scoring: IoU, greedy matching, AP, and mAP aggregates.

Matching is the usual greedy scheme — detections in descending score, each
taking the not-yet-matched ground-truth box of highest IoU at or above the
threshold. Average precision interpolates the precision envelope at the
101 recall levels 0.00, 0.01, ..., 1.00; classes with no ground truth have
undefined AP and are excluded from means rather than counted as zero.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from efk.errors import FormatError

__all__ = [
    "Detection",
    "iou",
    "match_detections",
    "average_precision",
    "map50",
    "map5095",
    "evaluate",
    "parse_detections",
    "serialize_detections",
]

RECALL_LEVELS = np.linspace(0.0, 1.0, 101)
IOU_THRESHOLDS_5095 = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Detection:
    """One scored detection box."""

    frame_id: str
    x: float
    y: float
    w: float
    h: float
    class_name: str
    score: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box size must be positive, got w={self.w}, h={self.h}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


def _xywh(box) -> tuple[float, float, float, float]:
    if hasattr(box, "x"):
        return float(box.x), float(box.y), float(box.w), float(box.h)
    x, y, w, h = box
    return float(x), float(y), float(w), float(h)


def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes; symmetric, in [0, 1]."""
    ax, ay, aw, ah = _xywh(a)
    bx, by, bw, bh = _xywh(b)
    ix = min(ax + aw, bx + bw) - max(ax, bx)
    iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (aw * ah + bw * bh - inter)


def match_detections(dets: Sequence, gts: Sequence, iou_thr: float) -> list[bool]:
    """True/false-positive flags per detection, in input order.

    Detections are visited by descending score (ties keep input order);
    each claims the unmatched ground-truth box of highest IoU when that IoU
    reaches ``iou_thr`` (exact >=, ties on IoU go to the lowest ground-truth
    index). Inputs are one frame and one class.
    """
    order = sorted(range(len(dets)), key=lambda i: -_score(dets[i]))
    taken = [False] * len(gts)
    flags = [False] * len(dets)
    for di in order:
        best_iou = 0.0
        best_gi = -1
        for gi, gt in enumerate(gts):
            if taken[gi]:
                continue
            value = iou(dets[di], gt)
            if value > best_iou:
                best_iou = value
                best_gi = gi
        if best_gi >= 0 and best_iou >= iou_thr:
            taken[best_gi] = True
            flags[di] = True
    return flags


def _score(det) -> float:
    return float(det.score) if hasattr(det, "score") else float(det[-1])


def _frame(obj) -> str:
    return getattr(obj, "frame_id", "")


def average_precision(dets: Sequence, gts: Sequence, iou_thr: float) -> float | None:
    """101-point interpolated AP for one class, or None without ground truth.

    Boxes may span frames — matching runs per frame, the precision/recall
    curve pools all detections by descending score (ties by input order).
    """
    if len(gts) == 0:
        return None
    if len(dets) == 0:
        return 0.0

    gts_by_frame: dict[str, list] = defaultdict(list)
    for gt in gts:
        gts_by_frame[_frame(gt)].append(gt)
    dets_by_frame: dict[str, list[int]] = defaultdict(list)
    for idx, det in enumerate(dets):
        dets_by_frame[_frame(det)].append(idx)

    tp = np.zeros(len(dets), dtype=bool)
    for frame, indices in dets_by_frame.items():
        flags = match_detections(
            [dets[i] for i in indices], gts_by_frame.get(frame, []), iou_thr
        )
        for i, flag in zip(indices, flags):
            tp[i] = flag

    order = sorted(range(len(dets)), key=lambda i: -_score(dets[i]))
    tp_sorted = tp[order]
    cum_tp = np.cumsum(tp_sorted)
    cum_fp = np.cumsum(~tp_sorted)
    precision = cum_tp / (cum_tp + cum_fp)
    recall = cum_tp / len(gts)

    # Right-to-left running max makes the envelope non-increasing; sample it
    # at the first point reaching each recall level (0 past the curve's end).
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_LEVELS, side="left")
    sampled = np.where(idx < len(recall), envelope[np.minimum(idx, len(recall) - 1)], 0.0)
    return float(sampled.mean())


def _by_class(items: Iterable) -> dict[str, list]:
    grouped: dict[str, list] = defaultdict(list)
    for item in items:
        grouped[item.class_name].append(item)
    return grouped


def _class_aps(dets: Sequence, gts: Sequence, iou_thr: float) -> dict[str, float]:
    det_groups = _by_class(dets)
    aps = {}
    for cls, cls_gts in _by_class(gts).items():
        ap = average_precision(det_groups.get(cls, []), cls_gts, iou_thr)
        if ap is not None:
            aps[cls] = ap
    return aps


def map50(dets: Sequence, gts: Sequence) -> float:
    """Mean AP over classes at IoU 0.5 (0.0 when no class is defined)."""
    aps = _class_aps(dets, gts, 0.5)
    return float(np.mean(list(aps.values()))) if aps else 0.0


def map5095(dets: Sequence, gts: Sequence) -> float:
    """Mean AP over classes and the ten IoU thresholds 0.50 to 0.95."""
    per_class = _per_class_5095(dets, gts)
    return float(np.mean(list(per_class.values()))) if per_class else 0.0


def _per_class_5095(dets: Sequence, gts: Sequence) -> dict[str, float]:
    det_groups = _by_class(dets)
    out = {}
    for cls, cls_gts in _by_class(gts).items():
        aps = [
            average_precision(det_groups.get(cls, []), cls_gts, thr)
            for thr in IOU_THRESHOLDS_5095
        ]
        values = [ap for ap in aps if ap is not None]
        if values:
            out[cls] = float(np.mean(values))
    return out


def evaluate(dets: Sequence, gts: Sequence) -> dict:
    """Full scoring report: map50, map5095, and both numbers per class."""
    ap50 = _class_aps(dets, gts, 0.5)
    ap5095 = _per_class_5095(dets, gts)
    return {
        "map50": float(np.mean(list(ap50.values()))) if ap50 else 0.0,
        "map5095": float(np.mean(list(ap5095.values()))) if ap5095 else 0.0,
        "per_class": {
            cls: {"ap50": ap50[cls], "ap5095": ap5095[cls]} for cls in sorted(ap50)
        },
    }


def parse_detections(source) -> list[Detection]:
    """Read scored detections from JSON lines (path or open text file)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    dets = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(record, dict):
            raise FormatError(f"line {lineno}: expected an object")
        for key in ("frame", "x", "y", "w", "h", "class", "score"):
            if key not in record:
                raise FormatError(f"line {lineno}: missing field {key!r}")
        values = {}
        for key in ("x", "y", "w", "h", "score"):
            v = record[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise FormatError(f"line {lineno}: field {key!r} must be a finite number")
            values[key] = float(v)
        if not isinstance(record["frame"], str) or not isinstance(record["class"], str):
            raise FormatError(f"line {lineno}: 'frame' and 'class' must be strings")
        try:
            dets.append(
                Detection(
                    frame_id=record["frame"],
                    x=values["x"],
                    y=values["y"],
                    w=values["w"],
                    h=values["h"],
                    class_name=record["class"],
                    score=values["score"],
                )
            )
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return dets


def serialize_detections(dets: Iterable[Detection]) -> str:
    lines = [
        json.dumps(
            {
                "frame": d.frame_id,
                "x": d.x,
                "y": d.y,
                "w": d.w,
                "h": d.h,
                "class": d.class_name,
                "score": d.score,
            },
            sort_keys=True,
        )
        for d in dets
    ]
    return "\n".join(lines) + ("\n" if lines else "")
