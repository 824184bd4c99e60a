#!/usr/bin/env python3
"""Benchmark the hot kernels on both backends (numba JIT vs pure numpy).

Usage: python benchmarks/bench_kernels.py [--repeat 5]

The numba path is warmed up once before timing so JIT compilation does
not count against it. Results also cross-check that both backends return
bit-identical arrays.
"""
import argparse
import time

import numpy as np

from depthpoison import _kernels as K


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_harmonic(repeat):
    rng = np.random.default_rng(0)
    h, w = 160, 160
    region = np.zeros((h, w), bool)
    region[40:120, 40:120] = True
    vals = rng.uniform(1.0, 60.0, (h, w))
    vals[region] = 0.0
    valid = ~region
    wgt = np.ones((h, w))
    wp = np.zeros((h + 2, w + 2))
    wp[1:-1, 1:-1] = wgt
    cnt = (wp[:-2, 1:-1] + wp[2:, 1:-1]) + (wp[1:-1, :-2] + wp[1:-1, 2:])
    u0 = np.where(valid, vals, 10.0)
    reg8 = region.astype(np.uint8)
    sweeps = 200

    K._harmonic_jit(u0.copy(), wgt, cnt, reg8, 0, 2)  # warm-up / compile
    t_jit = _time(lambda: K._harmonic_jit(u0.copy(), wgt, cnt, reg8, 0, sweeps), repeat)
    t_np = _time(lambda: K._harmonic_numpy(u0.copy(), wgt, cnt, reg8, 0, sweeps), repeat)
    ua, ub = u0.copy(), u0.copy()
    K._harmonic_jit(ua, wgt, cnt, reg8, 0, sweeps)
    K._harmonic_numpy(ub, wgt, cnt, reg8, 0, sweeps)
    return "harmonic fill (160x160, 200 sweeps)", t_jit, t_np, np.array_equal(ua, ub)


def bench_diamond_square(repeat):
    rng = np.random.default_rng(1)
    k = 9
    n = (1 << k) + 1
    noise = rng.uniform(-1.0, 1.0, (k, 2, n, n))
    amps = 0.55 ** np.arange(k, dtype=np.float64)
    K._diamond_square_jit(n, noise, amps)
    t_jit = _time(lambda: K._diamond_square_jit(n, noise, amps), repeat)
    t_np = _time(lambda: K._diamond_square_numpy(n, noise, amps), repeat)
    same = np.array_equal(K._diamond_square_jit(n, noise, amps), K._diamond_square_numpy(n, noise, amps))
    return f"diamond-square plasma ({n}x{n})", t_jit, t_np, same


def bench_worley(repeat):
    rng = np.random.default_rng(2)
    h, w, npts = 256, 512, 109
    pts = np.stack([rng.uniform(0, h, npts), rng.uniform(0, w, npts)], axis=1)
    K._worley_jit(8, 8, pts)
    t_jit = _time(lambda: K._worley_jit(h, w, pts), repeat)
    t_np = _time(lambda: K._worley_numpy(h, w, pts), repeat)
    a = K._worley_jit(h, w, pts)
    b = K._worley_numpy(h, w, pts)
    same = np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    return f"worley cells ({h}x{w}, {npts} points)", t_jit, t_np, same


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not K.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'kernel':44s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}  bit-equal")
    for bench in (bench_harmonic, bench_diamond_square, bench_worley):
        name, t_jit, t_np, same = bench(args.repeat)
        print(f"{name:44s} {t_jit * 1e3:8.2f}ms {t_np * 1e3:8.2f}ms {t_np / t_jit:7.1f}x  {same}")


if __name__ == "__main__":
    main()
