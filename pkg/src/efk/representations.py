"""Dense grid representations of sparse event windows.

Two tensors are produced: a per-polarity map of normalized latest-event
times (:func:`timestamp_frame`) and a time-sliced, bilinearly splatted
polarity accumulation (:func:`polarity_integration`). Both are invariant to
the order events arrive in and depend only on window-relative time, so
shifting every timestamp and the window bounds together changes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from efk import kernels
from efk.errors import EmptyWindowError, ShapeError
from efk.events import EventWindow

__all__ = [
    "TimestampFrame",
    "PolarityIntegration",
    "timestamp_frame",
    "polarity_integration",
    "render_png",
]


@dataclass(frozen=True)
class TimestampFrame:
    """Normalized latest-event times, shape (2, H, W).

    Channel 0 holds positive events, channel 1 negative ones; cells without
    an event of that polarity stay 0. ``t_ref`` is the absolute microsecond
    timestamp that normalized to 1.0 (the window's final event).
    """

    data: np.ndarray
    t_ref: int

    @classmethod
    def zeros(cls, height: int, width: int, t_ref: int = 0) -> "TimestampFrame":
        """All-zero frame — the documented stand-in for an empty window."""
        return cls(data=np.zeros((2, height, width), dtype=np.float64), t_ref=t_ref)


@dataclass(frozen=True)
class PolarityIntegration:
    """Signed bilinear polarity accumulation, shape (num_slices, H, W)."""

    data: np.ndarray

    @property
    def num_slices(self) -> int:
        return int(self.data.shape[0])


def timestamp_frame(window: EventWindow) -> TimestampFrame:
    """Per-pixel, per-polarity latest event time, scaled into [0, 1].

    Times are window-relative: a pixel's value is
    ``(latest_t - t_start) / (t_last - t_start)`` where ``t_last`` is the
    final event's timestamp, so the pixel holding the final event reads
    exactly 1.0 in its polarity channel. When every event shares the start
    timestamp the quotient is degenerate and active cells read 1.0.
    """
    if len(window) == 0:
        raise EmptyWindowError(
            "timestamp frame of an empty window is undefined; "
            "use TimestampFrame.zeros for a neutral substitute"
        )
    t_last = int(window.ts[-1])
    rel = window.ts - window.t_start
    grid = kernels.latest_timestamp_grid(
        window.xs, window.ys, rel, window.ps.astype(np.int8), window.height, window.width
    )
    denom = t_last - window.t_start
    active = grid >= 0
    if denom > 0:
        data = np.where(active, grid / float(denom), 0.0)
    else:
        data = active.astype(np.float64)
    return TimestampFrame(data=data, t_ref=t_last)


def polarity_integration(window: EventWindow, num_slices: int = 10) -> PolarityIntegration:
    """Splat signed polarities bilinearly over ``num_slices`` time slices.

    Each event's time is mapped to ``(num_slices - 1) * (t - t_first) /
    (t_last - t_first)`` and its polarity distributed over the two
    neighboring integer slices with weights summing to one. With fewer than
    two distinct timestamps the mapping is degenerate and all mass goes to
    slice 0. An empty window yields an all-zero tensor.
    """
    num_slices = int(num_slices)
    if num_slices < 1:
        raise ValueError(f"slice count must be >= 1, got {num_slices}")
    if len(window) == 0:
        return PolarityIntegration(
            data=np.zeros((num_slices, window.height, window.width), dtype=np.float64)
        )
    t_first = int(window.ts[0])
    t_last = int(window.ts[-1])
    denom = t_last - t_first
    if denom > 0 and num_slices > 1:
        t_star = ((num_slices - 1) * (window.ts - t_first)) / float(denom)
    else:
        t_star = np.zeros(len(window), dtype=np.float64)
    data = kernels.bilinear_splat(
        window.xs,
        window.ys,
        t_star,
        window.ps.astype(np.float64),
        num_slices,
        window.height,
        window.width,
    )
    return PolarityIntegration(data=data)


def _minmax_u8(arr: np.ndarray) -> np.ndarray:
    lo = float(arr.min())
    hi = float(arr.max())
    if hi > lo:
        scaled = (arr - lo) / (hi - lo)
    else:
        scaled = np.zeros_like(arr, dtype=np.float64)
    return np.round(scaled * 255.0).astype(np.uint8)


def _diverging_rgb(arr: np.ndarray) -> np.ndarray:
    # blue (negative) -> white (zero) -> red (positive)
    m = float(np.abs(arr).max())
    h, w = arr.shape
    out = np.full((h, w, 3), 255, dtype=np.uint8)
    if m == 0.0:
        return out
    n = 0.5 + arr / (2.0 * m)
    lower = np.clip(2.0 * n, 0.0, 1.0)
    upper = np.clip(2.0 - 2.0 * n, 0.0, 1.0)
    out[..., 0] = np.round(255.0 * lower)
    out[..., 1] = np.round(255.0 * np.minimum(lower, upper))
    out[..., 2] = np.round(255.0 * upper)
    return out


def render_png(tensor, mapping: str, path) -> None:
    """Write a tensor to an 8-bit PNG with linear min-max scaling.

    ``mapping`` is ``grayscale`` or ``signed-diverging`` (white at zero,
    red positive, blue negative). Rank-3 inputs are reduced first:
    1 channel squeezes to rank 2; with ``grayscale``, 2 channels render as a
    red/blue composite and 3 channels as RGB; anything wider (and every
    multi-channel ``signed-diverging`` input) is summed over channels.
    """
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ShapeError(f"renderable tensors are rank 2 or 3, got rank {arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError("tensor contains non-finite values")
    if mapping not in ("grayscale", "signed-diverging"):
        raise ValueError(f"unknown mapping {mapping!r}")

    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]

    if mapping == "signed-diverging":
        if arr.ndim == 3:
            arr = arr.sum(axis=0)
        img = Image.fromarray(_diverging_rgb(arr), mode="RGB")
    elif arr.ndim == 2:
        img = Image.fromarray(_minmax_u8(arr), mode="L")
    elif arr.shape[0] == 2:
        h, w = arr.shape[1:]
        rgb = np.zeros((h, w, 3), dtype=np.uint8)
        scaled = _minmax_u8(arr)
        rgb[..., 0] = scaled[0]
        rgb[..., 2] = scaled[1]
        img = Image.fromarray(rgb, mode="RGB")
    elif arr.shape[0] == 3:
        rgb = np.moveaxis(_minmax_u8(arr), 0, -1)
        img = Image.fromarray(np.ascontiguousarray(rgb), mode="RGB")
    else:
        img = Image.fromarray(_minmax_u8(arr.sum(axis=0)), mode="L")
    img.save(path, format="PNG")
