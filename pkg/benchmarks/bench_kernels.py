#!/usr/bin/env python3
"""Benchmark the hot kernels on both backends (numba @njit vs pure numpy).

The implementations are timed directly (bypassing the SPARSESUM_BACKEND
dispatch), so one run covers both.  Usage:

    python benchmarks/bench_kernels.py [--reps 2000] [--d 1024]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from sparsesum import kernels, rates


def _time(fn, *args, repeat: int = 3) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=2000, help="replicate rows")
    ap.add_argument("--d", type=int, default=1024, help="observation dimension")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    Y = rng.standard_normal((args.reps, args.d))
    s0 = rates.s_zero(args.d)
    s_arr = np.arange(1, s0 + 1, dtype=np.float64)
    base = np.log1p(args.d * math.log(args.d) / (s_arr * s_arr))
    T2 = np.ascontiguousarray(np.broadcast_to(4.0 * base, (args.reps, s0)))
    E = rng.standard_normal((args.reps, s0))
    W = np.ascontiguousarray(np.broadcast_to(4.0 * s_arr * np.sqrt(base), (args.reps, s0)))
    half = args.d // 2

    impls = {"numpy": (kernels._thresholded_sums_numpy,
                       kernels._lepski_select_numpy,
                       kernels._lower_half_mean_numpy)}
    if kernels._NUMBA_IMPORT_ERROR is None:
        impls["numba"] = (kernels._thresholded_sums_numba,
                          kernels._lepski_select_numba,
                          kernels._lower_half_mean_numba)
        # trigger JIT before timing
        impls["numba"][0](Y[:2], T2[:2])
        impls["numba"][1](E[:2], W[:2], s0 - 1)
        impls["numba"][2](Y[:2], half)
    else:
        print("numba unavailable; timing numpy only")

    print(f"reps={args.reps} d={args.d} s0={s0}  (best of 3, seconds)")
    header = f"{'kernel':<22}" + "".join(f"{name:>12}" for name in impls)
    print(header)
    rows = [
        ("thresholded_sums", lambda f: _time(f, Y, T2)),
        ("lepski_select", lambda f: _time(f, E, W, s0 - 1)),
        ("lower_half_mean", lambda f: _time(f, Y, half)),
    ]
    timings: dict[str, dict[str, float]] = {}
    for label, runner in rows:
        timings[label] = {name: runner(fns[["thresholded_sums", "lepski_select",
                                            "lower_half_mean"].index(label)])
                          for name, fns in impls.items()}
        print(f"{label:<22}" + "".join(f"{timings[label][name]:>12.4f}" for name in impls))
    if "numba" in impls:
        for label in timings:
            ratio = timings[label]["numpy"] / timings[label]["numba"]
            print(f"  {label}: numba is {ratio:.2f}x vs numpy")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
