"""Pure-numpy reference implementations of the hot kernels.

Shared dtype contract (both backends):

* ``xs``, ``ys``  - int64 pixel coordinates, already validated in range
* ``ts_rel``      - int64 timestamps relative to some origin, >= 0
* ``ps``          - int8 polarities in {-1, +1} (float64 where noted)
* float work happens in float64 throughout
"""

from __future__ import annotations

import numpy as np


def latest_timestamp_grid(xs, ys, ts_rel, ps, height, width):
    """Per-pixel, per-polarity maximum of ``ts_rel``.

    Returns an int64 array of shape (2, height, width); channel 0 collects
    positive events, channel 1 negative ones. Cells that receive no event
    hold -1.
    """
    grid = np.full((2, height, width), -1, dtype=np.int64)
    if xs.shape[0]:
        chan = (ps < 0).astype(np.intp)
        np.maximum.at(grid, (chan, ys, xs), ts_rel)
    return grid


def bilinear_splat(xs, ys, t_star, ps, num_slices, height, width):
    """Accumulate signed bilinear weights along the slice axis.

    ``t_star`` holds float64 positions in slice units; ``ps`` must already be
    float64. Each event deposits ``p * (1 - frac)`` into slice ``floor(t*)``
    and ``p * frac`` into the next slice when that slice exists. Returns a
    float64 array of shape (num_slices, height, width).
    """
    out = np.zeros((num_slices, height, width), dtype=np.float64)
    if not xs.shape[0]:
        return out
    k0 = np.floor(t_star).astype(np.int64)
    np.clip(k0, 0, num_slices - 1, out=k0)
    frac = t_star - k0
    np.add.at(out, (k0, ys, xs), ps * (1.0 - frac))
    k1 = k0 + 1
    keep = k1 < num_slices
    if np.any(keep):
        np.add.at(out, (k1[keep], ys[keep], xs[keep]), ps[keep] * frac[keep])
    return out


def valid_box_sum(a, win):
    """Sliding ``win`` x ``win`` window sums of a 2-D float64 array.

    Output shape is (H - win + 1, W - win + 1); every placement lies fully
    inside ``a`` (no padding here — callers pad beforehand as needed).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    cs = np.cumsum(a, axis=1)
    horiz = np.empty((a.shape[0], a.shape[1] - win + 1), dtype=np.float64)
    horiz[:, 0] = cs[:, win - 1]
    horiz[:, 1:] = cs[:, win:] - cs[:, :-win]
    cs = np.cumsum(horiz, axis=0)
    out = np.empty((a.shape[0] - win + 1, horiz.shape[1]), dtype=np.float64)
    out[0] = cs[win - 1]
    out[1:] = cs[win:] - cs[:-win]
    return out


def conv2d_same(inp, weight, bias):
    """2-D cross-correlation with zero padding that preserves H and W.

    ``inp`` is (C, H, W), ``weight`` is (O, C, kh, kw) with odd kh/kw, and
    ``bias`` is (O,). Everything is computed in float64; returns (O, H, W).
    """
    inp = np.asarray(inp, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    kh, kw = weight.shape[2], weight.shape[3]
    padded = np.pad(inp, ((0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
    out = np.einsum("chwyx,ocyx->ohw", windows, weight, optimize=True)
    return out + bias[:, None, None]
