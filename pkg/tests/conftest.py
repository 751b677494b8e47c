"""Shared fixtures: randomized windows, scene synthesis, window merging."""

from __future__ import annotations

import numpy as np
import pytest

from efk import kernels
from efk.events import EventWindow, SimConfig, simulate_events


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile the jitted kernels once so no test times cold-start costs.
    kernels.warmup()


def random_window(
    rng: np.random.Generator,
    n_events: int,
    width: int,
    height: int,
    t_max: int = 100_000,
) -> EventWindow:
    """A valid random window with t_start=0 and t_end at the last event."""
    xs = rng.integers(0, width, n_events)
    ys = rng.integers(0, height, n_events)
    ts = np.sort(rng.integers(0, t_max, n_events))
    ps = rng.choice(np.array([-1, 1], dtype=np.int64), n_events)
    t_end = int(ts[-1]) if n_events and ts[-1] > 0 else 1
    return EventWindow(
        xs, ys, ts, ps, width=width, height=height, t_start=0, t_end=t_end
    )


def merge_windows(windows: list[EventWindow], t_start: int, t_end: int) -> EventWindow:
    """Concatenate same-sensor windows into one, re-sorted by (t, y, x, p)."""
    xs = np.concatenate([w.xs for w in windows])
    ys = np.concatenate([w.ys for w in windows])
    ts = np.concatenate([w.ts for w in windows])
    ps = np.concatenate([w.ps for w in windows])
    order = np.lexsort((ps, xs, ys, ts))
    first = windows[0]
    return EventWindow(
        xs[order],
        ys[order],
        ts[order],
        ps[order],
        width=first.width,
        height=first.height,
        t_start=t_start,
        t_end=t_end,
    )


def moving_bar_frames(
    height: int = 48,
    width: int = 64,
    bar_width: int = 6,
    steps: int = 12,
    stride: int = 3,
    bright: float = 1.0,
    dark: float = 0.08,
) -> list[np.ndarray]:
    """A bright vertical bar sliding right over a dim background."""
    frames = []
    for k in range(steps + 1):
        frame = np.full((height, width), dark)
        left = 4 + k * stride
        frame[:, left : left + bar_width] = bright
        frames.append(frame)
    return frames


def moving_bar_window(
    duration_us: int = 100_000, c: float = 0.3, **kwargs
) -> tuple[EventWindow, np.ndarray]:
    """Events of the sliding-bar scene plus its final intensity frame."""
    frames = moving_bar_frames(**kwargs)
    cfg = SimConfig(c=c, eps=1e-3)
    steps = len(frames) - 1
    edges = [round(i * duration_us / steps) for i in range(steps + 1)]
    windows = [
        simulate_events(frames[i], frames[i + 1], cfg, edges[i], edges[i + 1])
        for i in range(steps)
    ]
    window = merge_windows(windows, 0, duration_us)
    return window, frames[-1]
