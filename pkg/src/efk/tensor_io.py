"""Flat binary tensor container and directory bundles.

A ``.tnsr`` file is the magic ``TNSR``, a little-endian u32 rank, one u32 per
dimension, then the values as flat little-endian float32 in C order. A bundle
is a directory of ``.tnsr`` files plus a ``manifest.json`` naming each tensor
and its shape, so partial or mismatched bundles fail loudly at load time.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from efk.errors import FormatError

__all__ = [
    "encode_tensor",
    "decode_tensor",
    "save_tensor",
    "load_tensor",
    "save_bundle",
    "load_bundle",
]

TNSR_MAGIC = b"TNSR"
_MAX_RANK = 16


def encode_tensor(array) -> bytes:
    """Serialize an array as float32 TNSR bytes."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim < 1:
        arr = arr.reshape(1)
    if arr.ndim > _MAX_RANK:
        raise FormatError(f"rank {arr.ndim} exceeds the container limit {_MAX_RANK}")
    header = TNSR_MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def decode_tensor(data: bytes) -> np.ndarray:
    """Parse TNSR bytes into a float32 array."""
    if len(data) < 8:
        raise FormatError(f"tensor header truncated: {len(data)} bytes")
    if data[:4] != TNSR_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {TNSR_MAGIC!r}")
    (rank,) = struct.unpack_from("<I", data, 4)
    if not 1 <= rank <= _MAX_RANK:
        raise FormatError(f"unsupported tensor rank {rank}")
    dims_end = 8 + 4 * rank
    if len(data) < dims_end:
        raise FormatError("tensor header truncated before dimension list")
    shape = struct.unpack_from(f"<{rank}I", data, 8)
    count = 1
    for d in shape:
        count *= d
    expected = dims_end + 4 * count
    if len(data) != expected:
        raise FormatError(
            f"tensor payload is {len(data) - dims_end} bytes, shape {shape} needs "
            f"{4 * count}"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=dims_end)
    return flat.reshape(shape).astype(np.float32)


def save_tensor(path, array) -> None:
    Path(path).write_bytes(encode_tensor(array))


def load_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def save_bundle(directory, tensors: dict[str, np.ndarray], extra: dict | None = None) -> None:
    """Write named tensors plus ``manifest.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "tensors": {
            name: list(np.asarray(arr).shape) for name, arr in tensors.items()
        }
    }
    if extra:
        manifest.update(extra)
    for name, arr in tensors.items():
        save_tensor(directory / f"{name}.tnsr", arr)
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def load_bundle(directory) -> tuple[dict[str, np.ndarray], dict]:
    """Read a bundle back; returns (tensors, manifest)."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise FormatError(f"no manifest.json in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest.json is not valid JSON: {exc}") from None
    listed = manifest.get("tensors")
    if not isinstance(listed, dict):
        raise FormatError("manifest.json lacks a 'tensors' mapping")
    tensors: dict[str, np.ndarray] = {}
    for name, shape in listed.items():
        path = directory / f"{name}.tnsr"
        if not path.is_file():
            raise FormatError(f"manifest lists {name!r} but {path.name} is missing")
        arr = load_tensor(path)
        if list(arr.shape) != list(shape):
            raise FormatError(
                f"tensor {name!r} has shape {list(arr.shape)}, manifest says {shape}"
            )
        tensors[name] = arr
    return tensors, manifest
