"""Annotation ingestion, box geometry, and split construction.

Ground-truth boxes travel as JSON lines (one object per box); cross-camera
alignment uses a 3x3 projective transform whose warped boxes are the
axis-aligned hulls of their four mapped corners; splits are built from a
sequence-level day/night metadata table. The class vocabulary is plain
config — the default eight names are a placeholder, not dataset truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from efk.errors import ConfigError, FormatError, GeometryError

__all__ = [
    "GroundTruthBox",
    "Homography",
    "SplitSpec",
    "DEFAULT_VOCABULARY",
    "BALANCED_CLASSES",
    "parse_annotations",
    "parse_annotations_lenient",
    "serialize_annotations",
    "filter_small_boxes",
    "warp_points",
    "warp_box",
    "load_sequence_metadata",
    "build_split",
    "sequence_of",
    "filter_frames",
    "apply_class_mode",
]

# Placeholder vocabulary: eight road users, swap via the vocabulary argument.
DEFAULT_VOCABULARY = (
    "car",
    "pedestrian",
    "truck",
    "bus",
    "bicycle",
    "motorcycle",
    "rider",
    "train",
)

BALANCED_CLASSES = frozenset({"car", "pedestrian"})


@dataclass(frozen=True)
class GroundTruthBox:
    """One annotated box: top-left corner, size, class, owning frame."""

    frame_id: str
    x: float
    y: float
    w: float
    h: float
    class_name: str

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(
                f"box size must be positive, got w={self.w}, h={self.h}"
            )

    @property
    def corners(self) -> np.ndarray:
        """The four corner points, clockwise from top-left, as (4, 2)."""
        return np.array(
            [
                [self.x, self.y],
                [self.x + self.w, self.y],
                [self.x + self.w, self.y + self.h],
                [self.x, self.y + self.h],
            ],
            dtype=np.float64,
        )

    def diagonal(self) -> float:
        return math.hypot(self.w, self.h)


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_text()


def _box_from_record(record: dict, lineno: int, vocabulary) -> GroundTruthBox:
    if not isinstance(record, dict):
        raise FormatError(f"line {lineno}: expected an object, got {type(record).__name__}")
    for key in ("frame", "x", "y", "w", "h", "class"):
        if key not in record:
            raise FormatError(f"line {lineno}: missing field {key!r}")
    frame = record["frame"]
    cls = record["class"]
    if not isinstance(frame, str) or not isinstance(cls, str):
        raise FormatError(f"line {lineno}: 'frame' and 'class' must be strings")
    values = []
    for key in ("x", "y", "w", "h"):
        v = record[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise FormatError(f"line {lineno}: field {key!r} must be a finite number")
        values.append(float(v))
    x, y, w, h = values
    if w <= 0 or h <= 0:
        raise FormatError(f"line {lineno}: box size must be positive (w={w}, h={h})")
    if vocabulary is not None and cls not in vocabulary:
        raise FormatError(f"line {lineno}: unknown class {cls!r}")
    return GroundTruthBox(frame_id=frame, x=x, y=y, w=w, h=h, class_name=cls)


def parse_annotations(
    source, vocabulary: Sequence[str] | None = DEFAULT_VOCABULARY
) -> list[GroundTruthBox]:
    """Read JSON-lines annotations, failing on the first bad record.

    ``source`` is a path or an open text file. ``vocabulary=None`` accepts
    any class name; otherwise unknown classes are rejected. Errors carry
    the 1-based line number.
    """
    boxes = []
    for lineno, line in enumerate(_read_text(source).splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        boxes.append(_box_from_record(record, lineno, vocabulary))
    return boxes


def parse_annotations_lenient(
    source, vocabulary: Sequence[str] | None = DEFAULT_VOCABULARY
) -> tuple[list[GroundTruthBox], list[str]]:
    """Like :func:`parse_annotations`, but bad records become warnings."""
    boxes = []
    warnings = []
    for lineno, line in enumerate(_read_text(source).splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            boxes.append(_box_from_record(record, lineno, vocabulary))
        except (json.JSONDecodeError, FormatError) as exc:
            msg = exc.msg if isinstance(exc, json.JSONDecodeError) else str(exc)
            if not msg.startswith("line "):
                msg = f"line {lineno}: {msg}"
            warnings.append(msg)
    return boxes, warnings


def serialize_annotations(boxes: Iterable[GroundTruthBox]) -> str:
    """Render boxes back to canonical JSON lines (inverse of parsing)."""
    lines = [
        json.dumps(
            {
                "frame": b.frame_id,
                "x": b.x,
                "y": b.y,
                "w": b.w,
                "h": b.h,
                "class": b.class_name,
            },
            sort_keys=True,
        )
        for b in boxes
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def filter_small_boxes(
    boxes: Sequence[GroundTruthBox], min_diag: float = 30.0
) -> list[GroundTruthBox]:
    """Keep boxes whose diagonal is at least ``min_diag`` pixels.

    The boundary is inclusive — only strictly shorter diagonals drop — and
    the comparison runs on squared lengths so integer-sided boxes such as
    18x24 against a threshold of 30 are decided exactly.
    """
    threshold = float(min_diag) ** 2
    return [b for b in boxes if b.w * b.w + b.h * b.h >= threshold]


@dataclass(frozen=True)
class Homography:
    """An invertible 3x3 projective transform over pixel coordinates."""

    m: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise GeometryError(f"homography must be 3x3, got {m.shape}")
        if abs(float(np.linalg.det(m))) <= 1e-9:
            raise GeometryError("homography is singular (|det| <= 1e-9)")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(m=np.eye(3))

    @classmethod
    def from_file(cls, path) -> "Homography":
        """Load 9 whitespace-separated numbers, row-major."""
        tokens = Path(path).read_text().split()
        if len(tokens) != 9:
            raise FormatError(f"homography file holds {len(tokens)} numbers, need 9")
        try:
            values = [float(tok) for tok in tokens]
        except ValueError as exc:
            raise FormatError(f"homography file has a non-numeric entry: {exc}") from None
        return cls(m=np.array(values, dtype=np.float64).reshape(3, 3))

    def compose(self, inner: "Homography") -> "Homography":
        """The transform applying ``inner`` first, then this one."""
        return Homography(m=self.m @ inner.m)

    def warp_points(self, points) -> np.ndarray:
        """Map (N, 2) points projectively; divides by the third coordinate."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError(f"points must be (N, 2), got {pts.shape}")
        homo = np.hstack([pts, np.ones((pts.shape[0], 1))])
        mapped = homo @ self.m.T
        wc = mapped[:, 2]
        tiny = np.abs(wc) < 1e-12
        if tiny.any():
            i = int(np.argmax(tiny))
            raise GeometryError(
                f"point {tuple(pts[i])} maps to the line at infinity"
            )
        return mapped[:, :2] / wc[:, None]

    def warp_box(
        self, box: GroundTruthBox, width: int, height: int
    ) -> GroundTruthBox | None:
        """Warp a box as the axis-aligned hull of its four mapped corners.

        The hull is clamped to the ``width`` x ``height`` target rectangle;
        a box that lands entirely outside returns None.
        """
        warped = self.warp_points(box.corners)
        x0 = float(np.clip(warped[:, 0].min(), 0.0, float(width)))
        x1 = float(np.clip(warped[:, 0].max(), 0.0, float(width)))
        y0 = float(np.clip(warped[:, 1].min(), 0.0, float(height)))
        y1 = float(np.clip(warped[:, 1].max(), 0.0, float(height)))
        if x1 <= x0 or y1 <= y0:
            return None
        return replace(box, x=x0, y=y0, w=x1 - x0, h=y1 - y0)


def warp_points(h: Homography, points) -> np.ndarray:
    return h.warp_points(points)


def warp_box(
    h: Homography, box: GroundTruthBox, width: int, height: int
) -> GroundTruthBox | None:
    return h.warp_box(box, width, height)


@dataclass(frozen=True)
class SplitSpec:
    """Which classes and which time of day a split keeps."""

    class_mode: str = "imbalanced"
    time_mode: str = "all"

    def __post_init__(self) -> None:
        if self.class_mode not in ("balanced", "imbalanced"):
            raise ConfigError(
                f"class_mode must be balanced or imbalanced, got {self.class_mode!r}"
            )
        if self.time_mode not in ("all", "daytime", "nighttime"):
            raise ConfigError(
                f"time_mode must be all, daytime, or nighttime, got {self.time_mode!r}"
            )


def load_sequence_metadata(source) -> dict[str, str]:
    """Read the sequence → day/night table from JSON."""
    try:
        raw = json.loads(_read_text(source))
    except json.JSONDecodeError as exc:
        raise FormatError(f"metadata is not valid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise FormatError("metadata must be a JSON object keyed by sequence id")
    table = {}
    for seq, entry in raw.items():
        if not isinstance(entry, dict) or "time" not in entry:
            raise FormatError(f"sequence {seq!r}: entry must be an object with 'time'")
        tag = entry["time"]
        if tag not in ("day", "night"):
            raise FormatError(f"sequence {seq!r}: unknown time tag {tag!r}")
        table[seq] = tag
    return table


def build_split(metadata: dict[str, str], spec: SplitSpec) -> list[str]:
    """Select the sequence ids matching the spec's time mode, sorted.

    ``metadata`` maps sequence id to "day"/"night" (see
    :func:`load_sequence_metadata`); an unrecognized tag is an error.
    """
    wanted = {"all": ("day", "night"), "daytime": ("day",), "nighttime": ("night",)}[
        spec.time_mode
    ]
    selected = []
    for seq in sorted(metadata):
        tag = metadata[seq]
        if tag not in ("day", "night"):
            raise FormatError(f"sequence {seq!r}: unknown time tag {tag!r}")
        if tag in wanted:
            selected.append(seq)
    return selected


def sequence_of(frame_id: str) -> str:
    """The sequence part of a frame id ("seq/frame"), or the id itself."""
    return frame_id.split("/", 1)[0]


def filter_frames(frame_ids: Iterable[str], sequences: Iterable[str]) -> list[str]:
    """Keep frame ids whose sequence is in the split, order preserved."""
    allowed = set(sequences)
    return [fid for fid in frame_ids if sequence_of(fid) in allowed]


def apply_class_mode(boxes: Sequence, spec: SplitSpec) -> list:
    """Under a balanced spec, keep only the two primary classes."""
    if spec.class_mode == "balanced":
        return [b for b in boxes if b.class_name in BALANCED_CLASSES]
    return list(boxes)
