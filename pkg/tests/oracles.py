"""Independent naive-loop reference implementations.

Everything here is deliberately written the slow, obvious way — python
loops, no shared helpers from the package under test — so each production
path has a second, structurally different route to the same numbers. Keep
it that way: these functions must never import the fast paths.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------- events

def simulated_counts(frame_prev, frame_next, c, eps):
    """Per-pixel (count, polarity) implied by one intensity step."""
    h, w = np.asarray(frame_prev).shape
    out = {}
    for y in range(h):
        for x in range(w):
            r = math.log(
                (float(frame_next[y][x]) + eps) / (float(frame_prev[y][x]) + eps)
            )
            if abs(r) <= c:
                continue
            out[(x, y)] = (int(abs(r) // c), 1 if r > 0 else -1)
    return out


def slice_events(events, t0, t1):
    """Brute-force filter of (x, y, t, p) tuples to t0 <= t <= t1."""
    return [e for e in events if t0 <= e[2] <= t1]


# ------------------------------------------------------- representations

def timestamp_frame_oracle(events, width, height, t_start):
    """Per-pixel, per-polarity max-time scan; normalized by the last event."""
    latest: dict = {}
    t_last = t_start
    for x, y, t, p in events:
        t_last = max(t_last, t)
        key = (x, y, 0 if p > 0 else 1)
        if key not in latest or t > latest[key]:
            latest[key] = t
    data = np.zeros((2, height, width), dtype=np.float64)
    denom = t_last - t_start
    for (x, y, chan), t in latest.items():
        data[chan, y, x] = (t - t_start) / denom if denom > 0 else 1.0
    return data


def polarity_integration_oracle(events, width, height, num_slices):
    """Double loop over events and slices with the tent weight spelled out."""
    data = np.zeros((num_slices, height, width), dtype=np.float64)
    if not events:
        return data
    t_first = events[0][2]
    t_last = events[-1][2]
    denom = t_last - t_first
    for x, y, t, p in events:
        if denom > 0 and num_slices > 1:
            t_star = (num_slices - 1) * (t - t_first) / denom
        else:
            t_star = 0.0
        for k in range(num_slices):
            weight = max(0.0, 1.0 - abs(k - t_star))
            data[k, y, x] += p * weight
    return data


def splat_weight_sum(t_star, num_slices):
    """Total tent-kernel mass one event deposits across all slices."""
    return sum(
        max(0.0, 1.0 - abs(k - t_star)) for k in range(num_slices)
    )


# ------------------------------------------------------------- structure

def _pad_replicate(img, r):
    h = len(img)
    w = len(img[0])
    out = [[0.0] * (w + 2 * r) for _ in range(h + 2 * r)]
    for i in range(h + 2 * r):
        si = min(max(i - r, 0), h - 1)
        for j in range(w + 2 * r):
            sj = min(max(j - r, 0), w - 1)
            out[i][j] = float(img[si][sj])
    return out


def local_cc_oracle(f, s, omega, var_eps):
    """Triple loop: per center pixel, explicit window means and sums."""
    f = np.asarray(f, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    h, w = f.shape
    r = omega // 2
    pf = _pad_replicate(f.tolist(), r)
    ps = _pad_replicate(s.tolist(), r)
    n = omega * omega
    total = 0.0
    for cy in range(h):
        for cx in range(w):
            mean_f = 0.0
            mean_s = 0.0
            for dy in range(omega):
                for dx in range(omega):
                    mean_f += pf[cy + dy][cx + dx]
                    mean_s += ps[cy + dy][cx + dx]
            mean_f /= n
            mean_s /= n
            cross = 0.0
            var_f = 0.0
            var_s = 0.0
            for dy in range(omega):
                for dx in range(omega):
                    df = pf[cy + dy][cx + dx] - mean_f
                    ds = ps[cy + dy][cx + dx] - mean_s
                    cross += df * ds
                    var_f += df * df
                    var_s += ds * ds
            total += cross * cross / (var_f * var_s + var_eps)
    return total


def tv_loss_oracle(f):
    f = np.asarray(f, dtype=np.float64)
    h, w = f.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                total += (f[y, x + 1] - f[y, x]) ** 2
            if y + 1 < h:
                total += (f[y + 1, x] - f[y, x]) ** 2
    return -total


def edge_magnitude_oracle(img, kx, ky, pad):
    """Valid correlation of two kernels over a replicate-padded image."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    kh = len(kx)
    kw = len(kx[0])
    if pad == "center":
        padded = _pad_replicate(img.tolist(), kh // 2)
    else:  # pad bottom-right only (2x2 stencils)
        padded = _pad_replicate(img.tolist(), 0)
        for row in padded:
            row.append(row[-1])
        padded.append(list(padded[-1]))
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            gx = 0.0
            gy = 0.0
            for dy in range(kh):
                for dx in range(kw):
                    gx += padded[y + dy][x + dx] * kx[dy][dx]
                    gy += padded[y + dy][x + dx] * ky[dy][dx]
            out[y, x] = math.sqrt(gx * gx + gy * gy)
    return out


# ---------------------------------------------------------------- fusion

def conv2d_oracle(inp, filt, bias):
    """Six nested loops, zero padding, cross-correlation."""
    inp = np.asarray(inp, dtype=np.float64)
    filt = np.asarray(filt, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    c_in, h, w = inp.shape
    c_out, _, kh, kw = filt.shape
    ph, pw = kh // 2, kw // 2
    out = np.zeros((c_out, h, w))
    for oc in range(c_out):
        for y in range(h):
            for x in range(w):
                acc = float(bias[oc])
                for ic in range(c_in):
                    for dy in range(kh):
                        for dx in range(kw):
                            yy = y + dy - ph
                            xx = x + dx - pw
                            if 0 <= yy < h and 0 <= xx < w:
                                acc += inp[ic, yy, xx] * filt[oc, ic, dy, dx]
                out[oc, y, x] = acc
    return out


def erm_oracle(f_r, f_e, weights):
    """Pool, concat, naive conv, sigmoid, multiply — composed step by step."""
    f_r = np.asarray(f_r, dtype=np.float64)
    f_e = np.asarray(f_e, dtype=np.float64)
    c, h, w = f_r.shape
    avg = np.zeros((1, h, w))
    mx = np.zeros((1, h, w))
    for y in range(h):
        for x in range(w):
            vals = [f_r[ic, y, x] for ic in range(c)]
            avg[0, y, x] = sum(vals) / c
            mx[0, y, x] = max(vals)
    pooled = np.concatenate([avg, mx], axis=0)
    conv = conv2d_oracle(pooled, weights["erm_conv"], weights["erm_bias"])
    mask = 1.0 / (1.0 + np.exp(-conv))
    return f_e * mask


def ldam_oracle(f_r, f_e, weights, softmax_over="event"):
    """Explicit matrix construction of the attention fusion."""
    f_r = np.asarray(f_r, dtype=np.float64)
    f_e = np.asarray(f_e, dtype=np.float64)
    c, h, w = f_r.shape
    hw = h * w
    q = conv2d_oracle(f_r, weights["ldam_q"], weights["ldam_q_bias"]).reshape(-1, hw)
    k = conv2d_oracle(f_e, weights["ldam_k"], weights["ldam_k_bias"]).reshape(-1, hw)
    v = conv2d_oracle(f_e, weights["ldam_v"], weights["ldam_v_bias"]).reshape(-1, hw)
    cp = q.shape[0]

    logits = np.zeros((hw, hw))
    for i in range(hw):
        for j in range(hw):
            logits[i, j] = sum(q[a, i] * k[a, j] for a in range(cp))
    attn = np.zeros((hw, hw))
    if softmax_over == "event":
        for i in range(hw):
            row = logits[i] - logits[i].max()
            ex = np.exp(row)
            attn[i] = ex / ex.sum()
    else:
        for j in range(hw):
            col = logits[:, j] - logits[:, j].max()
            ex = np.exp(col)
            attn[:, j] = ex / ex.sum()

    attended = np.zeros((cp, hw))
    for a in range(cp):
        for i in range(hw):
            attended[a, i] = sum(v[a, j] * attn[i, j] for j in range(hw))
    fused = conv2d_oracle(
        attended.reshape(cp, h, w), weights["ldam_out"], weights["ldam_out_bias"]
    )
    return f_r + fused


# --------------------------------------------------------------- metrics

def iou_oracle(a, b):
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    x0 = max(ax, bx)
    y0 = max(ay, by)
    x1 = min(ax + aw, bx + bw)
    y1 = min(ay + ah, by + bh)
    if x1 <= x0 or y1 <= y0:
        return 0.0
    inter = (x1 - x0) * (y1 - y0)
    return inter / (aw * ah + bw * bh - inter)


def match_oracle(det_boxes, det_scores, gt_boxes, iou_thr):
    """Greedy rule spelled out: per score-ranked detection, scan every
    unmatched ground-truth box and take the best at or above threshold."""
    n = len(det_boxes)
    ranked = sorted(range(n), key=lambda i: (-det_scores[i], i))
    used = set()
    flags = [False] * n
    for di in ranked:
        candidates = []
        for gi in range(len(gt_boxes)):
            if gi in used:
                continue
            value = iou_oracle(det_boxes[di], gt_boxes[gi])
            if value >= iou_thr:
                candidates.append((value, -gi))
        if candidates:
            best = max(candidates)
            used.add(-best[1])
            flags[di] = True
    return flags


def average_precision_oracle(det_boxes, det_scores, gt_boxes, iou_thr):
    """Single-frame 101-point AP built from the matching oracle."""
    if not gt_boxes:
        return None
    if not det_boxes:
        return 0.0
    flags = match_oracle(det_boxes, det_scores, gt_boxes, iou_thr)
    ranked = sorted(range(len(det_boxes)), key=lambda i: (-det_scores[i], i))
    tp = 0
    fp = 0
    points = []  # (recall, precision)
    for di in ranked:
        if flags[di]:
            tp += 1
        else:
            fp += 1
        points.append((tp / len(gt_boxes), tp / (tp + fp)))
    total = 0.0
    for level_idx in range(101):
        level = level_idx / 100.0
        best = 0.0
        for recall, precision in points:
            if recall >= level and precision > best:
                best = precision
        total += best
    return total / 101.0


def warp_box_oracle(matrix, box, width, height):
    """Per-corner projective map, axis-aligned hull, clamp, drop."""
    x, y, w, h = box
    corners = [(x, y), (x + w, y), (x + w, y + h), (x, y + h)]
    warped = []
    for cx, cy in corners:
        hx = matrix[0][0] * cx + matrix[0][1] * cy + matrix[0][2]
        hy = matrix[1][0] * cx + matrix[1][1] * cy + matrix[1][2]
        hw_ = matrix[2][0] * cx + matrix[2][1] * cy + matrix[2][2]
        warped.append((hx / hw_, hy / hw_))
    xs = [p[0] for p in warped]
    ys = [p[1] for p in warped]
    x0 = min(max(min(xs), 0.0), float(width))
    x1 = min(max(max(xs), 0.0), float(width))
    y0 = min(max(min(ys), 0.0), float(height))
    y1 = min(max(max(ys), 0.0), float(height))
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1 - x0, y1 - y0)


def box_sum_oracle(a, win):
    a = np.asarray(a, dtype=np.float64)
    oh = a.shape[0] - win + 1
    ow = a.shape[1] - win + 1
    out = np.zeros((oh, ow))
    for i in range(oh):
        for j in range(ow):
            s = 0.0
            for di in range(win):
                for dj in range(win):
                    s += a[i + di, j + dj]
            out[i, j] = s
    return out
