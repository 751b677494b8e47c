"""Edge supervision maps, structure losses, and a direct image optimizer.

The objective couples two terms over a candidate structure image and an
edge-magnitude supervision map:

* a local normalized cross-correlation score summed over all pixels, each
  term being the squared windowed covariance divided by the product of
  windowed variances (denominator stabilized by ``var_eps``), entering the
  loss negated so that higher correlation lowers the loss;
* a negated squared-gradient term (forward differences) that rewards
  contrast.

Both terms have closed-form gradients with respect to the image pixels,
so :func:`fit_sif` can run plain gradient descent (optionally with a
step-halving line search that guarantees a non-increasing loss trace)
without any learned machinery. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from efk import kernels
from efk.errors import ConfigError, DivergenceError, ShapeError
from efk.representations import PolarityIntegration, TimestampFrame

__all__ = [
    "SupervisionMap",
    "SifImage",
    "CcConfig",
    "OptConfig",
    "TracePoint",
    "sobel_edges",
    "roberts_edges",
    "laplace_edges",
    "edge_map",
    "local_cc",
    "cc_loss",
    "tv_loss",
    "total_loss",
    "grad_total",
    "fit_sif",
    "trace_csv",
]

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T.copy()
_ROBERTS_A = np.array([[1.0, 0.0], [0.0, -1.0]])
_ROBERTS_B = np.array([[0.0, 1.0], [-1.0, 0.0]])
_LAPLACE = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])

EDGE_OPERATORS = ("sobel", "roberts", "laplace")


@dataclass(frozen=True)
class SupervisionMap:
    """Non-negative edge magnitudes plus the operator that produced them."""

    data: np.ndarray
    operator: str


@dataclass(frozen=True)
class SifImage:
    """A real-valued structure image (finite entries)."""

    data: np.ndarray


@dataclass(frozen=True)
class CcConfig:
    """Local-correlation settings: window size and variance stabilizer."""

    omega: int = 9
    var_eps: float = 1e-5

    def __post_init__(self) -> None:
        if self.omega < 3 or self.omega % 2 == 0:
            raise ConfigError(f"window size must be odd and >= 3, got {self.omega}")
        if not self.var_eps > 0:
            raise ConfigError(f"variance stabilizer must be positive, got {self.var_eps}")


@dataclass(frozen=True)
class OptConfig:
    """Gradient-descent settings for :func:`fit_sif`."""

    step_size: float = 1e-3
    iterations: int = 200
    line_search: bool = True
    max_halvings: int = 30

    def __post_init__(self) -> None:
        if not self.step_size > 0:
            raise ConfigError(f"step size must be positive, got {self.step_size}")
        if self.iterations < 0:
            raise ConfigError(f"iteration count must be >= 0, got {self.iterations}")
        if self.max_halvings < 0:
            raise ConfigError(f"halving budget must be >= 0, got {self.max_halvings}")


class TracePoint(NamedTuple):
    """One optimizer trace row."""

    iteration: int
    cc_term: float
    tv_term: float
    total: float


def _image(value) -> np.ndarray:
    if isinstance(value, (SifImage, SupervisionMap)):
        value = value.data
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {arr.shape}")
    return arr


def _correlate_valid(padded: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    windows = np.lib.stride_tricks.sliding_window_view(padded, kernel.shape)
    return np.einsum("hwyx,yx->hw", windows, kernel, optimize=True)


def _edge_input(image, minimum: int) -> np.ndarray:
    arr = _image(image)
    if arr.shape[0] < minimum or arr.shape[1] < minimum:
        raise ShapeError(
            f"image {arr.shape} too small for a {minimum}x{minimum} operator"
        )
    return arr


def sobel_edges(image) -> SupervisionMap:
    """Gradient magnitude from the standard 3x3 kernel pair.

    Borders are replicate-padded, so output matches the input shape. A unit
    vertical step yields magnitude 4 along the edge columns (kernel row
    weights 1, 2, 1 against a unit horizontal difference).
    """
    arr = _edge_input(image, 3)
    padded = np.pad(arr, 1, mode="edge")
    gx = _correlate_valid(padded, _SOBEL_X)
    gy = _correlate_valid(padded, _SOBEL_Y)
    return SupervisionMap(data=np.hypot(gx, gy), operator="sobel")


def roberts_edges(image) -> SupervisionMap:
    """Diagonal-difference magnitude from the 2x2 kernel pair.

    The 2x2 stencils look down-right, so the input is replicate-padded one
    pixel at the bottom and right edges.
    """
    arr = _edge_input(image, 2)
    padded = np.pad(arr, ((0, 1), (0, 1)), mode="edge")
    ga = _correlate_valid(padded, _ROBERTS_A)
    gb = _correlate_valid(padded, _ROBERTS_B)
    return SupervisionMap(data=np.hypot(ga, gb), operator="roberts")


def laplace_edges(image) -> SupervisionMap:
    """Absolute response of the 4-neighbor Laplacian, replicate-padded."""
    arr = _edge_input(image, 3)
    padded = np.pad(arr, 1, mode="edge")
    return SupervisionMap(data=np.abs(_correlate_valid(padded, _LAPLACE)), operator="laplace")


def edge_map(image, operator: str = "sobel") -> SupervisionMap:
    """Dispatch to one of the edge operators by name."""
    if operator == "sobel":
        return sobel_edges(image)
    if operator == "roberts":
        return roberts_edges(image)
    if operator == "laplace":
        return laplace_edges(image)
    raise ConfigError(f"unknown edge operator {operator!r}; choose from {EDGE_OPERATORS}")


def _window_sums(sif: np.ndarray, sup: np.ndarray, cfg: CcConfig):
    """Windowed moment maps shared by the loss and its gradient.

    Returns the replicate-padded inputs plus, per center pixel: the windowed
    covariance ``a``, the two windowed sum-of-squared-deviation terms
    ``var_f``/``var_s``, and the window means of each input.
    """
    r = cfg.omega // 2
    n = float(cfg.omega * cfg.omega)
    pf = np.pad(sif, r, mode="edge")
    ps = np.pad(sup, r, mode="edge")
    s_f = kernels.valid_box_sum(pf, cfg.omega)
    s_s = kernels.valid_box_sum(ps, cfg.omega)
    s_ff = kernels.valid_box_sum(pf * pf, cfg.omega)
    s_ss = kernels.valid_box_sum(ps * ps, cfg.omega)
    s_fs = kernels.valid_box_sum(pf * ps, cfg.omega)
    a = s_fs - s_f * s_s / n
    var_f = s_ff - s_f * s_f / n
    var_s = s_ss - s_s * s_s / n
    return pf, ps, a, var_f, var_s, s_f / n, s_s / n


def _check_pair(sif, sup) -> tuple[np.ndarray, np.ndarray]:
    f = _image(sif)
    s = _image(sup)
    if f.shape != s.shape:
        raise ShapeError(f"image shapes differ: {f.shape} vs {s.shape}")
    return f, s


def local_cc(sif, sup, cfg: CcConfig = CcConfig()) -> float:
    """Sum over pixels of the squared windowed correlation.

    Every per-pixel term lies in [0, 1] (the stabilizer keeps zero-variance
    windows at 0), so the total is bounded by the pixel count.
    """
    f, s = _check_pair(sif, sup)
    _, _, a, var_f, var_s, _, _ = _window_sums(f, s, cfg)
    denom = var_f * var_s + cfg.var_eps
    return float(np.sum(a * a / denom))


def cc_loss(sif, sup, cfg: CcConfig = CcConfig()) -> float:
    """Negated :func:`local_cc`: better correlation means lower loss."""
    return -local_cc(sif, sup, cfg)


def tv_loss(sif) -> float:
    """Negated squared forward-difference energy — rewards contrast.

    Always <= 0, and 0 exactly when the image is constant. The final row
    and column have no forward neighbor and contribute nothing.
    """
    f = _image(sif)
    if f.shape[0] < 2 or f.shape[1] < 2:
        raise ShapeError(f"need at least 2x2 pixels, got {f.shape}")
    dx = f[:, 1:] - f[:, :-1]
    dy = f[1:, :] - f[:-1, :]
    return -float(np.sum(dx * dx) + np.sum(dy * dy))


def total_loss(sif, sup, cfg: CcConfig = CcConfig()) -> float:
    """Correlation term plus contrast term."""
    return cc_loss(sif, sup, cfg) + tv_loss(sif)


def _loss_parts(f: np.ndarray, s: np.ndarray, cfg: CcConfig) -> tuple[float, float]:
    cc = -local_cc(f, s, cfg)
    tv = tv_loss(f)
    return cc, tv


def _fold_pad_adjoint(grad_padded: np.ndarray, r: int, shape) -> np.ndarray:
    """Accumulate padded-pixel gradients back onto their replicate sources."""
    h, w = shape
    g = grad_padded.copy()
    g[r] += g[:r].sum(axis=0)
    g[h + r - 1] += g[h + r :].sum(axis=0)
    g = g[r : h + r]
    g[:, r] += g[:, :r].sum(axis=1)
    g[:, w + r - 1] += g[:, w + r :].sum(axis=1)
    return g[:, r : w + r]


def _grad_cc(f: np.ndarray, s: np.ndarray, cfg: CcConfig) -> np.ndarray:
    """Closed-form gradient of :func:`local_cc` with respect to the image.

    For center i with covariance a_i, deviation sums bf_i/bs_i, and
    d_i = bf_i*bs_i + var_eps, a window pixel u contributes
    2a_i/d_i * (S_u - mean_s_i) - 2a_i^2 bs_i/d_i^2 * (F_u - mean_f_i).
    Scattering those center coefficients over each window is itself a box
    sum (of zero-padded center maps, evaluated on the padded grid), after
    which the replicate-padding adjoint folds border contributions in.
    """
    r = cfg.omega // 2
    pf, ps, a, var_f, var_s, mean_f, mean_s = _window_sums(f, s, cfg)
    denom = var_f * var_s + cfg.var_eps
    c1 = 2.0 * a / denom
    c2 = 2.0 * a * a * var_s / (denom * denom)

    def spread(center_map: np.ndarray) -> np.ndarray:
        padded = np.pad(center_map, 2 * r)
        return kernels.valid_box_sum(padded, cfg.omega)

    grad_padded = (
        ps * spread(c1)
        - spread(c1 * mean_s)
        - pf * spread(c2)
        + spread(c2 * mean_f)
    )
    return _fold_pad_adjoint(grad_padded, r, f.shape)


def _grad_tv(f: np.ndarray) -> np.ndarray:
    dx = f[:, 1:] - f[:, :-1]
    dy = f[1:, :] - f[:-1, :]
    g = np.zeros_like(f)
    g[:, :-1] += 2.0 * dx
    g[:, 1:] -= 2.0 * dx
    g[:-1, :] += 2.0 * dy
    g[1:, :] -= 2.0 * dy
    return g


def grad_total(sif, sup, cfg: CcConfig = CcConfig()) -> np.ndarray:
    """Analytic gradient of :func:`total_loss` in the image's pixels."""
    f, s = _check_pair(sif, sup)
    return -_grad_cc(f, s, cfg) + _grad_tv(f)


def fit_sif(
    frame: TimestampFrame,
    integration: PolarityIntegration,
    sup: SupervisionMap,
    opt: OptConfig = OptConfig(),
    cfg: CcConfig = CcConfig(),
) -> tuple[SifImage, list[TracePoint]]:
    """Gradient-descend a structure image against a supervision map.

    The image starts as the per-pixel maximum over the two polarity
    channels of ``frame``; the integration tensor is shape-checked so the
    call site stays honest about what one fit consumes, but the descent
    itself runs on the image alone. With ``line_search`` the step is halved
    until the loss stops increasing, giving a non-increasing trace; if no
    acceptable step remains the fit stops early. Without it a step that
    makes the loss non-finite raises :class:`DivergenceError`.

    Returns the fitted image and the accepted-loss trace (the first row is
    the initialization, so ``iterations`` steps give at most
    ``iterations + 1`` rows).
    """
    if frame.data.ndim != 3 or frame.data.shape[0] != 2:
        raise ShapeError(f"expected a (2, H, W) frame, got {frame.data.shape}")
    spatial = frame.data.shape[1:]
    if integration.data.ndim != 3 or integration.data.shape[1:] != spatial:
        raise ShapeError(
            f"integration spatial shape {integration.data.shape} does not match "
            f"frame {frame.data.shape}"
        )
    s = _image(sup)
    if s.shape != spatial:
        raise ShapeError(
            f"supervision shape {s.shape} does not match frame spatial shape {spatial}"
        )

    f = np.max(np.asarray(frame.data, dtype=np.float64), axis=0)
    cc, tv = _loss_parts(f, s, cfg)
    trace = [TracePoint(0, cc, tv, cc + tv)]
    current = cc + tv

    for it in range(1, opt.iterations + 1):
        g = grad_total(f, s, cfg)
        if opt.line_search:
            step = opt.step_size
            accepted = None
            for _ in range(opt.max_halvings + 1):
                cand = f - step * g
                cc, tv = _loss_parts(cand, s, cfg)
                candidate_loss = cc + tv
                if np.isfinite(candidate_loss) and candidate_loss <= current:
                    accepted = (cand, cc, tv, candidate_loss)
                    break
                step *= 0.5
            if accepted is None:
                break
            f, cc, tv, current = accepted
        else:
            f = f - opt.step_size * g
            cc, tv = _loss_parts(f, s, cfg)
            current = cc + tv
            if not np.isfinite(current):
                raise DivergenceError(
                    f"loss became non-finite at iteration {it}; "
                    "reduce the step size or enable the line search"
                )
        trace.append(TracePoint(it, cc, tv, current))
    return SifImage(data=f), trace


def trace_csv(trace: list[TracePoint]) -> str:
    """Render an optimizer trace as CSV text."""
    lines = ["iteration,cc_term,tv_term,total"]
    lines.extend(
        f"{p.iteration},{p.cc_term:.17g},{p.tv_term:.17g},{p.total:.17g}" for p in trace
    )
    return "\n".join(lines) + "\n"
