"""Hot numeric kernels: numba fast path with a pure-numpy fallback.

The backend is chosen once, at import time, from the ``EFK_BACKEND``
environment variable:

* ``auto`` (default) - numba when importable, numpy otherwise
* ``numba``          - require the jitted kernels, fail if numba is absent
* ``numpy``          - force the pure-numpy fallback

Both implementations live in :mod:`efk.kernels.numba_impl` and
:mod:`efk.kernels.numpy_impl` and stay importable side by side, so tests and
``python -m efk.bench`` can compare them directly regardless of the active
backend. All kernels are sequential and deterministic: identical inputs give
identical outputs on a given backend, independent of thread settings.
"""

from __future__ import annotations

import os

from efk.errors import ConfigError

_requested = os.environ.get("EFK_BACKEND", "auto").strip().lower() or "auto"
if _requested not in ("auto", "numba", "numpy"):
    raise ConfigError(
        f"EFK_BACKEND must be one of auto/numba/numpy, got {_requested!r}"
    )

if _requested == "numpy":
    from efk.kernels import numpy_impl as _impl

    BACKEND = "numpy"
elif _requested == "numba":
    from efk.kernels import numba_impl as _impl

    BACKEND = "numba"
else:
    try:
        from efk.kernels import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        from efk.kernels import numpy_impl as _impl

        BACKEND = "numpy"

latest_timestamp_grid = _impl.latest_timestamp_grid
bilinear_splat = _impl.bilinear_splat
valid_box_sum = _impl.valid_box_sum
conv2d_same = _impl.conv2d_same


def backend_name() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND


def warmup() -> None:
    """Run every kernel once on tiny inputs (triggers JIT compilation)."""
    import numpy as np

    xs = np.array([0, 1], dtype=np.int64)
    ys = np.array([0, 1], dtype=np.int64)
    ts = np.array([0, 5], dtype=np.int64)
    ps = np.array([1, -1], dtype=np.int8)
    latest_timestamp_grid(xs, ys, ts, ps, 2, 2)
    bilinear_splat(xs, ys, np.array([0.0, 1.5]), ps.astype(np.float64), 3, 2, 2)
    valid_box_sum(np.ones((4, 4)), 3)
    conv2d_same(np.ones((1, 3, 3)), np.ones((1, 1, 1, 1)), np.zeros(1))
