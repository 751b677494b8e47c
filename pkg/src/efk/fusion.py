"""Cross-modal feature fusion: refine-gate and global-attention kernels.

Two stages operate on (C, H, W) feature maps:

* :func:`erm` gates event features with a single-channel sigmoid mask
  derived from channel-pooled frame features (average pool and max pool
  concatenated, then a 7x7 convolution);
* :func:`ldam` runs single-head dot-product attention at reduced channel
  width between frame queries and event keys/values, projects back, and
  adds the result onto the frame features as a residual.

:func:`afcm` is their composition. Everything is a pure float64 function
of explicit weight tensors — there is no training here, only forward math.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from efk import kernels, tensor_io
from efk.errors import ShapeError, WeightsError

__all__ = [
    "FeatureMap",
    "FusionWeights",
    "AttentionMap",
    "conv2d",
    "channel_pool",
    "erm",
    "ldam",
    "afcm",
]

_WEIGHT_NAMES = (
    "erm_conv",
    "erm_bias",
    "ldam_q",
    "ldam_q_bias",
    "ldam_k",
    "ldam_k_bias",
    "ldam_v",
    "ldam_v_bias",
    "ldam_out",
    "ldam_out_bias",
)


@dataclass(frozen=True)
class FeatureMap:
    """A dense (C, H, W) feature tensor tagged with its modality."""

    data: np.ndarray
    modality: str = "rgb"

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ShapeError(f"feature map must be (C, H, W), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("feature map contains non-finite values")
        if self.modality not in ("rgb", "event"):
            raise ValueError(f"modality must be rgb or event, got {self.modality!r}")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def spatial(self) -> tuple[int, int]:
        return int(self.data.shape[1]), int(self.data.shape[2])


@dataclass(frozen=True)
class AttentionMap:
    """A (H*W, H*W) attention matrix; rows over query positions."""

    data: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.data.sum(axis=1)


@dataclass(frozen=True)
class FusionWeights:
    """All filters and biases for one fusion block.

    The gate convolution maps 2 pooled channels to 1 with a 7x7 filter; the
    attention projections are 1x1 filters taking ``channels`` down to
    ``channels // reduction`` and back. ``reduction`` must divide
    ``channels``.
    """

    channels: int
    reduction: int
    tensors: dict = field(repr=False)

    def __post_init__(self) -> None:
        if self.reduction < 1 or self.channels < 1:
            raise WeightsError(
                f"channels ({self.channels}) and reduction ({self.reduction}) "
                "must be positive"
            )
        if self.channels % self.reduction != 0:
            raise WeightsError(
                f"reduction {self.reduction} does not divide channels {self.channels}"
            )
        reduced = self.channels // self.reduction
        expected = {
            "erm_conv": (1, 2, 7, 7),
            "erm_bias": (1,),
            "ldam_q": (reduced, self.channels, 1, 1),
            "ldam_q_bias": (reduced,),
            "ldam_k": (reduced, self.channels, 1, 1),
            "ldam_k_bias": (reduced,),
            "ldam_v": (reduced, self.channels, 1, 1),
            "ldam_v_bias": (reduced,),
            "ldam_out": (self.channels, reduced, 1, 1),
            "ldam_out_bias": (self.channels,),
        }
        missing = set(expected) - set(self.tensors)
        if missing:
            raise WeightsError(f"missing weight tensors: {sorted(missing)}")
        cleaned = {}
        for name, shape in expected.items():
            arr = np.asarray(self.tensors[name], dtype=np.float64)
            if arr.shape != shape:
                raise WeightsError(
                    f"tensor {name!r} has shape {arr.shape}, expected {shape}"
                )
            cleaned[name] = arr
        object.__setattr__(self, "tensors", cleaned)

    @property
    def reduced(self) -> int:
        return self.channels // self.reduction

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @classmethod
    def random(cls, channels: int, reduction: int = 2, seed: int = 0) -> "FusionWeights":
        """Draw a weight set from a seeded generator (scale 0.1 normals)."""
        if channels < 1 or reduction < 1 or channels % reduction != 0:
            raise WeightsError(
                f"reduction {reduction} must divide channels {channels}"
            )
        rng = np.random.default_rng(seed)
        reduced = channels // reduction
        scale = 0.1

        def draw(*shape):
            return rng.normal(0.0, scale, size=shape)

        tensors = {
            "erm_conv": draw(1, 2, 7, 7),
            "erm_bias": draw(1),
            "ldam_q": draw(reduced, channels, 1, 1),
            "ldam_q_bias": draw(reduced),
            "ldam_k": draw(reduced, channels, 1, 1),
            "ldam_k_bias": draw(reduced),
            "ldam_v": draw(reduced, channels, 1, 1),
            "ldam_v_bias": draw(reduced),
            "ldam_out": draw(channels, reduced, 1, 1),
            "ldam_out_bias": draw(channels),
        }
        return cls(channels=channels, reduction=reduction, tensors=tensors)

    def save(self, directory) -> None:
        tensor_io.save_bundle(
            directory,
            {name: self.tensors[name] for name in _WEIGHT_NAMES},
            extra={"channels": self.channels, "reduction": self.reduction},
        )

    @classmethod
    def load(cls, directory) -> "FusionWeights":
        tensors, manifest = tensor_io.load_bundle(directory)
        try:
            channels = int(manifest["channels"])
            reduction = int(manifest["reduction"])
        except (KeyError, TypeError, ValueError):
            raise WeightsError(
                "bundle manifest must carry integer 'channels' and 'reduction'"
            ) from None
        return cls(channels=channels, reduction=reduction, tensors=tensors)


def conv2d(inp, filt, bias) -> np.ndarray:
    """Same-size 2-D cross-correlation with zero padding.

    ``inp`` is (C_in, H, W); ``filt`` is (C_out, C_in, kh, kw) with odd
    kernel sides; ``bias`` is (C_out,).
    """
    inp = np.asarray(inp, dtype=np.float64)
    filt = np.asarray(filt, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if inp.ndim != 3:
        raise ShapeError(f"input must be (C, H, W), got {inp.shape}")
    if filt.ndim != 4 or filt.shape[1] != inp.shape[0]:
        raise ShapeError(
            f"filter {filt.shape} does not match input channels {inp.shape[0]}"
        )
    if filt.shape[2] % 2 == 0 or filt.shape[3] % 2 == 0:
        raise ShapeError(f"kernel sides must be odd, got {filt.shape[2:]}")
    if bias.shape != (filt.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} does not match {filt.shape[0]} filters")
    return kernels.conv2d_same(
        np.ascontiguousarray(inp), np.ascontiguousarray(filt), bias
    )


def channel_pool(f: FeatureMap | np.ndarray, mode: str) -> np.ndarray:
    """Collapse the channel axis to one plane by max or mean."""
    data = f.data if isinstance(f, FeatureMap) else np.asarray(f, dtype=np.float64)
    if data.ndim != 3:
        raise ShapeError(f"expected (C, H, W), got {data.shape}")
    if mode == "max":
        return data.max(axis=0, keepdims=True)
    if mode == "avg":
        return data.mean(axis=0, keepdims=True)
    raise ValueError(f"pool mode must be max or avg, got {mode!r}")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def erm(f_r: FeatureMap, f_e: FeatureMap, w: FusionWeights) -> FeatureMap:
    """Gate event features with a mask pooled from the frame features.

    The mask is ``sigmoid(conv7x7(concat(avg_pool, max_pool)))`` — one
    channel, strictly inside (0, 1) — broadcast across all event channels.
    Channel counts of the two inputs may differ; spatial sizes must match.
    """
    if f_r.spatial != f_e.spatial:
        raise ShapeError(
            f"spatial sizes differ: rgb {f_r.spatial} vs event {f_e.spatial}"
        )
    pooled = np.concatenate(
        [channel_pool(f_r, "avg"), channel_pool(f_r, "max")], axis=0
    )
    mask = _sigmoid(conv2d(pooled, w["erm_conv"], w["erm_bias"]))
    return FeatureMap(data=f_e.data * mask, modality="event")


def _softmax(logits: np.ndarray, axis: int) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=axis, keepdims=True)


def ldam(
    f_r: FeatureMap,
    f_e_refined: FeatureMap,
    w: FusionWeights,
    *,
    softmax_over: str = "event",
    return_attention: bool = False,
):
    """Attend frame queries over event keys/values, then fuse residually.

    Queries come from the frame features, keys and values from the refined
    event features, all through 1x1 projections at reduced width. The
    attention matrix is (H*W, H*W) with rows indexed by frame position;
    with ``softmax_over="event"`` (default) each row is normalized over the
    event positions it attends to, ``"rgb"`` normalizes each column's frame
    positions instead. The attended values are projected back to full width
    and added onto the frame features, so zero output-projection weights
    return the frame features untouched.
    """
    if f_r.data.shape != f_e_refined.data.shape:
        raise ShapeError(
            f"shapes differ: {f_r.data.shape} vs {f_e_refined.data.shape}"
        )
    if f_r.channels != w.channels:
        raise WeightsError(
            f"weights built for {w.channels} channels, features have {f_r.channels}"
        )
    if softmax_over not in ("event", "rgb"):
        raise ValueError(f"softmax_over must be event or rgb, got {softmax_over!r}")
    h, wi = f_r.spatial
    hw = h * wi
    reduced = w.reduced

    query = conv2d(f_r.data, w["ldam_q"], w["ldam_q_bias"]).reshape(reduced, hw)
    key = conv2d(f_e_refined.data, w["ldam_k"], w["ldam_k_bias"]).reshape(reduced, hw)
    value = conv2d(f_e_refined.data, w["ldam_v"], w["ldam_v_bias"]).reshape(reduced, hw)

    logits = query.T @ key  # (frame position, event position)
    attn = _softmax(logits, axis=1 if softmax_over == "event" else 0)
    attended = value @ attn.T  # (reduced, frame position)

    fused = conv2d(
        attended.reshape(reduced, h, wi), w["ldam_out"], w["ldam_out_bias"]
    )
    out = FeatureMap(data=f_r.data + fused, modality="rgb")
    if return_attention:
        return out, AttentionMap(data=attn)
    return out


def afcm(
    f_r: FeatureMap,
    f_e: FeatureMap,
    w: FusionWeights,
    *,
    softmax_over: str = "event",
    return_attention: bool = False,
):
    """Full fusion block: refine the event features, then attend and fuse."""
    refined = erm(f_r, f_e, w)
    return ldam(
        f_r,
        refined,
        w,
        softmax_over=softmax_over,
        return_attention=return_attention,
    )
