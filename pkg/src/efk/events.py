"""Event stream data model, bit-exact codecs, and synthetic event generation.

Events are sparse brightness-change records ``(x, y, t, p)``: pixel column,
pixel row, integer microsecond timestamp, and polarity in {-1, +1}. Streams
are handled as struct-of-arrays (:class:`EventWindow`) so that million-event
windows stay cheap to validate, slice, and encode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from efk.errors import ConfigError, FormatError, ShapeError

__all__ = [
    "Event",
    "EventWindow",
    "SimConfig",
    "decode_events",
    "encode_events",
    "simulate_events",
    "window_slice",
]


class Event(NamedTuple):
    """A single event record."""

    x: int
    y: int
    t: int
    p: int


# Packed little-endian record layout of the EVT1 container (14 bytes/event).
_EVT1_MAGIC = b"EVT1"
_EVT1_RECORD = np.dtype(
    [("x", "<u2"), ("y", "<u2"), ("p", "<i1"), ("pad", "<u1"), ("t", "<u8")]
)
_EVT1_HEADER_LEN = 16
_U16_MAX = 0xFFFF

_CSV_HEADER = "x,y,t_us,p"


def _as_int_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must be integers, got dtype {arr.dtype}")
    return arr.astype(np.int64)


class EventWindow:
    """An ordered event stream over a fixed sensor and time interval.

    Coordinates, timestamps, and polarities live in parallel arrays
    (``xs``, ``ys``, ``ts``, ``ps``); the arrays are defensively copied and
    frozen, so a window never changes after construction. Timestamps must be
    non-decreasing and stay inside ``[t_start, t_end]``.
    """

    __slots__ = ("xs", "ys", "ts", "ps", "width", "height", "t_start", "t_end")

    def __init__(
        self,
        xs,
        ys,
        ts,
        ps,
        *,
        width: int,
        height: int,
        t_start: int,
        t_end: int,
    ) -> None:
        xs = _as_int_array(xs, "xs")
        ys = _as_int_array(ys, "ys")
        ts = _as_int_array(ts, "ts")
        ps = _as_int_array(ps, "ps")
        n = xs.shape[0]
        if not (ys.shape[0] == ts.shape[0] == ps.shape[0] == n):
            raise ValueError("xs, ys, ts, ps must have equal lengths")
        if width < 1 or height < 1:
            raise ValueError(f"resolution must be positive, got {width}x{height}")
        t_start = int(t_start)
        t_end = int(t_end)
        if t_end <= t_start:
            raise ValueError(f"t_end ({t_end}) must exceed t_start ({t_start})")
        if n:
            if xs.min() < 0 or xs.max() >= width:
                raise ValueError("x coordinate out of range")
            if ys.min() < 0 or ys.max() >= height:
                raise ValueError("y coordinate out of range")
            if ts.min() < 0:
                raise ValueError("timestamps must be non-negative")
            if np.any(np.diff(ts) < 0):
                raise ValueError("timestamps must be non-decreasing")
            if ts[0] < t_start or ts[-1] > t_end:
                raise ValueError("event timestamps must lie within [t_start, t_end]")
            if not np.all((ps == 1) | (ps == -1)):
                raise ValueError("polarities must be -1 or +1")
        for name, arr in (("xs", xs), ("ys", ys), ("ts", ts), ("ps", ps)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "width", int(width))
        object.__setattr__(self, "height", int(height))
        object.__setattr__(self, "t_start", t_start)
        object.__setattr__(self, "t_end", t_end)

    def __setattr__(self, name, value):  # windows are immutable
        raise AttributeError("EventWindow is immutable")

    @classmethod
    def from_events(
        cls,
        events: Sequence[Event],
        *,
        width: int,
        height: int,
        t_start: int,
        t_end: int,
    ) -> "EventWindow":
        xs = [e[0] for e in events]
        ys = [e[1] for e in events]
        ts = [e[2] for e in events]
        ps = [e[3] for e in events]
        return cls(
            xs, ys, ts, ps, width=width, height=height, t_start=t_start, t_end=t_end
        )

    @classmethod
    def empty(
        cls, *, width: int, height: int, t_start: int = 0, t_end: int = 1
    ) -> "EventWindow":
        return cls(
            [], [], [], [], width=width, height=height, t_start=t_start, t_end=t_end
        )

    @property
    def events(self) -> list[Event]:
        """The stream as a list of :class:`Event` tuples (copies)."""
        return list(self)

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start

    def __len__(self) -> int:
        return int(self.xs.shape[0])

    def __iter__(self) -> Iterator[Event]:
        for x, y, t, p in zip(self.xs, self.ys, self.ts, self.ps):
            yield Event(int(x), int(y), int(t), int(p))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventWindow):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.t_start == other.t_start
            and self.t_end == other.t_end
            and len(self) == len(other)
            and bool(np.array_equal(self.xs, other.xs))
            and bool(np.array_equal(self.ys, other.ys))
            and bool(np.array_equal(self.ts, other.ts))
            and bool(np.array_equal(self.ps, other.ps))
        )

    def __repr__(self) -> str:
        return (
            f"EventWindow(n={len(self)}, {self.width}x{self.height}, "
            f"t=[{self.t_start}, {self.t_end}])"
        )


@dataclass(frozen=True)
class SimConfig:
    """Contrast-threshold settings for :func:`simulate_events`.

    ``c`` is the log-intensity change needed to fire an event; ``eps`` is
    added to both intensities before the log so zero pixels stay finite.
    """

    c: float
    eps: float = 1e-3

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ConfigError(f"contrast threshold must be positive, got {self.c}")
        if not self.eps > 0:
            raise ConfigError(f"log floor must be positive, got {self.eps}")


def encode_events(window: EventWindow, format: str = "evt1") -> bytes:
    """Serialize a window to bytes ("evt1" binary or "csv" text)."""
    fmt = format.lower()
    if fmt in ("evt1", "binary-evt1", "binary"):
        return _encode_evt1(window)
    if fmt == "csv":
        return _encode_csv(window)
    raise ConfigError(f"unknown event format {format!r}")


def decode_events(
    data: bytes,
    format: str = "evt1",
    *,
    width: int | None = None,
    height: int | None = None,
) -> EventWindow:
    """Parse bytes into an :class:`EventWindow`.

    The binary container carries its own resolution; csv input requires
    ``width`` and ``height``. Malformed input raises :class:`FormatError`
    carrying the first offending record index where one exists. Since
    neither container stores window bounds, the decoded window gets
    ``t_start = 0`` and ``t_end`` equal to the final timestamp (or 1 when
    that would collapse the interval).
    """
    fmt = format.lower()
    if fmt in ("evt1", "binary-evt1", "binary"):
        return _decode_evt1(data)
    if fmt == "csv":
        if width is None or height is None:
            raise ConfigError("csv decoding requires width and height")
        return _decode_csv(data, int(width), int(height))
    raise ConfigError(f"unknown event format {format!r}")


def _derived_bounds(ts: np.ndarray) -> tuple[int, int]:
    if ts.shape[0] == 0:
        return 0, 1
    return 0, max(int(ts[-1]), 1)


def _encode_evt1(window: EventWindow) -> bytes:
    if window.width > _U16_MAX or window.height > _U16_MAX:
        raise FormatError(
            f"resolution {window.width}x{window.height} exceeds the u16 container limit"
        )
    n = len(window)
    header = (
        _EVT1_MAGIC
        + int(window.width).to_bytes(2, "little")
        + int(window.height).to_bytes(2, "little")
        + int(n).to_bytes(8, "little")
    )
    rec = np.empty(n, dtype=_EVT1_RECORD)
    rec["x"] = window.xs
    rec["y"] = window.ys
    rec["p"] = window.ps
    rec["pad"] = 0
    rec["t"] = window.ts
    return header + rec.tobytes()


def _decode_evt1(data: bytes) -> EventWindow:
    if len(data) < _EVT1_HEADER_LEN:
        raise FormatError(f"header truncated: {len(data)} bytes, need {_EVT1_HEADER_LEN}")
    if data[:4] != _EVT1_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {_EVT1_MAGIC!r}")
    width = int.from_bytes(data[4:6], "little")
    height = int.from_bytes(data[6:8], "little")
    count = int.from_bytes(data[8:16], "little")
    if width == 0 or height == 0:
        raise FormatError(f"zero resolution {width}x{height} in header")
    body = data[_EVT1_HEADER_LEN:]
    expected = count * _EVT1_RECORD.itemsize
    if len(body) != expected:
        raise FormatError(
            f"record section is {len(body)} bytes, header promises {expected}"
        )
    rec = np.frombuffer(body, dtype=_EVT1_RECORD)
    xs = rec["x"].astype(np.int64)
    ys = rec["y"].astype(np.int64)
    ps = rec["p"].astype(np.int64)
    ts_u = rec["t"]
    if count:
        bad = xs >= width
        if bad.any():
            i = int(np.argmax(bad))
            raise FormatError(
                f"x={int(xs[i])} out of range for width {width} at record {i}", index=i
            )
        bad = ys >= height
        if bad.any():
            i = int(np.argmax(bad))
            raise FormatError(
                f"y={int(ys[i])} out of range for height {height} at record {i}",
                index=i,
            )
        bad = (ps != 1) & (ps != -1)
        if bad.any():
            i = int(np.argmax(bad))
            raise FormatError(
                f"polarity {int(ps[i])} not in {{-1, +1}} at record {i}", index=i
            )
        bad = rec["pad"] != 0
        if bad.any():
            i = int(np.argmax(bad))
            raise FormatError(f"nonzero pad byte at record {i}", index=i)
        if ts_u.max() > np.iinfo(np.int64).max:
            i = int(np.argmax(ts_u > np.iinfo(np.int64).max))
            raise FormatError(f"timestamp overflows at record {i}", index=i)
        ts = ts_u.astype(np.int64)
        drops = np.diff(ts) < 0
        if drops.any():
            i = int(np.argmax(drops)) + 1
            raise FormatError(
                f"timestamps decrease at record {i} "
                f"({int(ts[i - 1])} -> {int(ts[i])})",
                index=i,
            )
    else:
        ts = np.zeros(0, dtype=np.int64)
    t_start, t_end = _derived_bounds(ts)
    return EventWindow(
        xs, ys, ts, ps, width=width, height=height, t_start=t_start, t_end=t_end
    )


def _encode_csv(window: EventWindow) -> bytes:
    lines = [_CSV_HEADER]
    lines.extend(
        f"{x},{y},{t},{p}"
        for x, y, t, p in zip(window.xs, window.ys, window.ts, window.ps)
    )
    return ("\n".join(lines) + "\n").encode("ascii")


def _decode_csv(data: bytes, width: int, height: int) -> EventWindow:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"csv input is not valid text: {exc}") from None
    xs: list[int] = []
    ys: list[int] = []
    ts: list[int] = []
    ps: list[int] = []
    index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if index == 0 and not xs and line == _CSV_HEADER:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(
                f"line {lineno}: expected 4 fields, got {len(parts)}", index=index
            )
        try:
            x, y, t, p = (int(part.strip()) for part in parts)
        except ValueError:
            raise FormatError(
                f"line {lineno}: non-integer field in {line!r}", index=index
            ) from None
        if not 0 <= x < width:
            raise FormatError(
                f"line {lineno}: x={x} out of range for width {width}", index=index
            )
        if not 0 <= y < height:
            raise FormatError(
                f"line {lineno}: y={y} out of range for height {height}", index=index
            )
        if t < 0:
            raise FormatError(f"line {lineno}: negative timestamp {t}", index=index)
        if p not in (-1, 1):
            raise FormatError(
                f"line {lineno}: polarity {p} not in {{-1, +1}}", index=index
            )
        if ts and t < ts[-1]:
            raise FormatError(
                f"line {lineno}: timestamps decrease ({ts[-1]} -> {t})", index=index
            )
        xs.append(x)
        ys.append(y)
        ts.append(t)
        ps.append(p)
        index += 1
    ts_arr = np.asarray(ts, dtype=np.int64)
    t_start, t_end = _derived_bounds(ts_arr)
    return EventWindow(
        xs, ys, ts_arr, ps, width=width, height=height, t_start=t_start, t_end=t_end
    )


def simulate_events(
    frame_prev,
    frame_next,
    cfg: SimConfig,
    t0: int,
    t1: int,
) -> EventWindow:
    """Generate the events implied by an intensity step between two frames.

    Per pixel, the log-intensity change ``r = log((next+eps)/(prev+eps))``
    fires ``floor(|r|/c)`` events of polarity ``sign(r)`` — zero when
    ``|r| <= c``, since only changes strictly beyond the threshold fire.
    The j-th of k events at a pixel lands at ``t0 + max(1, j*(t1-t0)//k)``,
    spreading the burst over ``(t0, t1]`` with the final event exactly at
    ``t1``. Output is sorted by ``(t, y, x, p)``.
    """
    prev = np.asarray(frame_prev, dtype=np.float64)
    nxt = np.asarray(frame_next, dtype=np.float64)
    if prev.ndim != 2:
        raise ShapeError(f"frames must be 2-D, got shape {prev.shape}")
    if prev.shape != nxt.shape:
        raise ShapeError(f"frame shapes differ: {prev.shape} vs {nxt.shape}")
    if prev.size and (prev.min() < 0 or nxt.min() < 0):
        raise ValueError("intensities must be non-negative")
    t0 = int(t0)
    t1 = int(t1)
    if t1 <= t0:
        raise ValueError(f"t1 ({t1}) must exceed t0 ({t0})")
    height, width = prev.shape

    ratio = np.log((nxt + cfg.eps) / (prev + cfg.eps))
    mag = np.abs(ratio)
    counts = np.where(mag <= cfg.c, 0.0, np.floor(mag / cfg.c)).astype(np.int64)

    ys_px, xs_px = np.nonzero(counts)
    if ys_px.size == 0:
        return EventWindow.empty(width=width, height=height, t_start=t0, t_end=t1)
    k = counts[ys_px, xs_px]
    pol = np.where(ratio[ys_px, xs_px] > 0, 1, -1).astype(np.int64)

    xs = np.repeat(xs_px, k).astype(np.int64)
    ys = np.repeat(ys_px, k).astype(np.int64)
    ps = np.repeat(pol, k)
    k_rep = np.repeat(k, k)
    offsets = np.cumsum(k) - k
    j = np.arange(xs.shape[0], dtype=np.int64) - np.repeat(offsets, k) + 1
    delta = np.int64(t1 - t0)
    ts = t0 + np.maximum(1, (j * delta) // k_rep)

    order = np.lexsort((ps, xs, ys, ts))
    return EventWindow(
        xs[order],
        ys[order],
        ts[order],
        ps[order],
        width=width,
        height=height,
        t_start=t0,
        t_end=t1,
    )


def window_slice(window: EventWindow, t0: int, duration: int) -> EventWindow:
    """Cut the sub-window of events with ``t0 <= t <= t0 + duration``.

    Bounds of the result are reset to ``[t0, t0 + duration]``; an empty
    result is fine.
    """
    duration = int(duration)
    t0 = int(t0)
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    lo = int(np.searchsorted(window.ts, t0, side="left"))
    hi = int(np.searchsorted(window.ts, t0 + duration, side="right"))
    return EventWindow(
        window.xs[lo:hi],
        window.ys[lo:hi],
        window.ts[lo:hi],
        window.ps[lo:hi],
        width=window.width,
        height=window.height,
        t_start=t0,
        t_end=t0 + duration,
    )
