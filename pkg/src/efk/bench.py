"""Timing comparison of the jitted kernels against the numpy fallback.

Run as ``python -m efk.bench``. Each kernel is exercised on a
representative workload with both implementations (after a jit warmup) and
the per-call times and speedups are printed. Purely informative — results
of the two backends are cross-checked in the test suite, not here.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from efk.kernels import numpy_impl


def _workloads(rng: np.random.Generator, n_events: int, side: int):
    xs = rng.integers(0, side, n_events).astype(np.int64)
    ys = rng.integers(0, side, n_events).astype(np.int64)
    ts = np.sort(rng.integers(0, 100_000, n_events)).astype(np.int64)
    ps = rng.choice(np.array([-1, 1], dtype=np.int8), n_events)
    t_star = rng.uniform(0.0, 9.0, n_events)
    image = rng.standard_normal((side, side))
    feat = rng.standard_normal((8, side, side))
    filt = rng.standard_normal((8, 8, 7, 7))
    bias = rng.standard_normal(8)
    return {
        "latest_timestamp_grid": (xs, ys, ts, ps, side, side),
        "bilinear_splat": (xs, ys, t_star, ps.astype(np.float64), 10, side, side),
        "valid_box_sum": (np.pad(image, 4, mode="edge"), 9),
        "conv2d_same": (feat, filt, bias),
    }


def _time(fn, args, repeat: int) -> float:
    timer = timeit.Timer(lambda: fn(*args))
    number = max(1, timer.autorange()[0] // 4)
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m efk.bench",
        description="Compare jitted and numpy kernel timings.",
    )
    parser.add_argument("--events", type=int, default=200_000)
    parser.add_argument("--side", type=int, default=128)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        from efk.kernels import numba_impl
    except ImportError:
        numba_impl = None

    rng = np.random.default_rng(args.seed)
    work = _workloads(rng, args.events, args.side)

    print(f"workload: {args.events} events, {args.side}x{args.side} grids")
    header = f"{'kernel':<24} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call_args in work.items():
        np_time = _time(getattr(numpy_impl, name), call_args, args.repeat)
        if numba_impl is None:
            print(f"{name:<24} {np_time * 1e3:>10.3f}ms {'n/a':>12} {'n/a':>9}")
            continue
        nb_fn = getattr(numba_impl, name)
        nb_fn(*call_args)  # compile outside the timer
        nb_time = _time(nb_fn, call_args, args.repeat)
        print(
            f"{name:<24} {np_time * 1e3:>10.3f}ms {nb_time * 1e3:>10.3f}ms "
            f"{np_time / nb_time:>8.1f}x"
        )
    if numba_impl is None:
        print("numba is not importable; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
