#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Run:  python3 benchmarks/bench_backends.py [--scale N]

The dispatchers in bldsid.kernels pick one path at import time (env var
BLDSID_NUMBA); this script times both concrete implementations directly,
after a warmup call so JIT compilation is not charged to the numba side.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bldsid import Dims, InputDistribution, draw_inputs, make_rng, random_system
from bldsid import kernels


def _time(fn, repeats: int = 3) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--scale", type=int, default=1, help="problem-size multiplier")
    args = parser.parse_args()
    s = args.scale

    sys_ = random_system(Dims(5, 2, 2), 0.4, 0.2, seed=0)
    A, B, C, D = sys_.a_stack, sys_.B, sys_.C, sys_.D

    T_sim = 20000 * s
    u_sim = draw_inputs(InputDistribution.SPHERE, 2, T_sim, make_rng(1))
    w = 0.01 * make_rng(2).standard_normal((T_sim, 5))
    z = 0.01 * make_rng(3).standard_normal((T_sim, 2))

    u_feat = draw_inputs(InputDistribution.SPHERE, 2, 2000 * s + 8, make_rng(4))
    L = 7

    useq = draw_inputs(InputDistribution.SPHERE, 2, 256 * 64 * s, make_rng(5)).reshape(
        256 * s, 64, 2
    )

    rows = []

    def bench(name, jit_fn, numpy_fn):
        if jit_fn is not None:
            jit_fn()  # warmup / compile
            t_jit = _time(jit_fn)
        else:
            t_jit = None
        t_np = _time(numpy_fn)
        rows.append((name, t_jit, t_np))

    d = 3**L + 1
    out = np.empty((u_feat.shape[0] - L, d))
    bench(
        f"simulate (T={T_sim})",
        (lambda: kernels.simulate_jit(A, B, C, D, u_sim, w, z, 1e12))
        if kernels.simulate_jit
        else None,
        lambda: kernels.simulate_numpy(A, B, C, D, u_sim, w, z, 1e12),
    )
    bench(
        f"features (rows={u_feat.shape[0] - L}, d={d})",
        (lambda: kernels.feature_rows_jit(u_feat, L, out))
        if kernels.feature_rows_jit
        else None,
        lambda: kernels.feature_rows_numpy(u_feat, L),
    )
    bench(
        f"product scan (S={useq.shape[0]}, K=64)",
        (lambda: kernels.product_scan_jit(A, useq)) if kernels.product_scan_jit else None,
        lambda: kernels.product_scan_numpy(A, useq),
    )

    print(f"{'kernel':<38} {'numba [s]':>12} {'numpy [s]':>12} {'speedup':>9}")
    for name, t_jit, t_np in rows:
        if t_jit is None:
            print(f"{name:<38} {'n/a':>12} {t_np:>12.4f} {'-':>9}")
        else:
            print(f"{name:<38} {t_jit:>12.4f} {t_np:>12.4f} {t_np / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()
