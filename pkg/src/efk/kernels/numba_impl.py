"""Jitted loop implementations of the hot kernels.

Same signatures and dtype contract as :mod:`efk.kernels.numpy_impl`. All
kernels are compiled with ``cache=True`` and run single-threaded — no
``parallel=True`` anywhere, so results are bitwise reproducible for a given
input regardless of how many threads the process is allowed.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def latest_timestamp_grid(xs, ys, ts_rel, ps, height, width):
    grid = np.full((2, height, width), -1, dtype=np.int64)
    for i in range(xs.shape[0]):
        chan = 0 if ps[i] > 0 else 1
        if ts_rel[i] > grid[chan, ys[i], xs[i]]:
            grid[chan, ys[i], xs[i]] = ts_rel[i]
    return grid


@njit(cache=True)
def bilinear_splat(xs, ys, t_star, ps, num_slices, height, width):
    out = np.zeros((num_slices, height, width), dtype=np.float64)
    for i in range(xs.shape[0]):
        k0 = int(np.floor(t_star[i]))
        if k0 < 0:
            k0 = 0
        elif k0 > num_slices - 1:
            k0 = num_slices - 1
        frac = t_star[i] - k0
        out[k0, ys[i], xs[i]] += ps[i] * (1.0 - frac)
        if k0 + 1 < num_slices:
            out[k0 + 1, ys[i], xs[i]] += ps[i] * frac
    return out


@njit(cache=True)
def valid_box_sum(a, win):
    ah, aw = a.shape
    ow = aw - win + 1
    oh = ah - win + 1
    horiz = np.empty((ah, ow), dtype=np.float64)
    for i in range(ah):
        s = 0.0
        for j in range(win):
            s += a[i, j]
        horiz[i, 0] = s
        for j in range(1, ow):
            s += a[i, j + win - 1] - a[i, j - 1]
            horiz[i, j] = s
    out = np.empty((oh, ow), dtype=np.float64)
    for j in range(ow):
        s = 0.0
        for i in range(win):
            s += horiz[i, j]
        out[0, j] = s
        for i in range(1, oh):
            s += horiz[i + win - 1, j] - horiz[i - 1, j]
            out[i, j] = s
    return out


@njit(cache=True)
def conv2d_same(inp, weight, bias):
    c, h, w = inp.shape
    o = weight.shape[0]
    kh, kw = weight.shape[2], weight.shape[3]
    ph = kh // 2
    pw = kw // 2
    out = np.empty((o, h, w), dtype=np.float64)
    for oc in range(o):
        for y in range(h):
            for x in range(w):
                acc = bias[oc]
                for ic in range(c):
                    for ky in range(kh):
                        yy = y + ky - ph
                        if yy < 0 or yy >= h:
                            continue
                        for kx in range(kw):
                            xx = x + kx - pw
                            if 0 <= xx < w:
                                acc += inp[ic, yy, xx] * weight[oc, ic, ky, kx]
                out[oc, y, x] = acc
    return out
