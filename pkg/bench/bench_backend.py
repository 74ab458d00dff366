#!/usr/bin/env python3
"""Benchmark the compiled core against the numpy fallback.

Times the three hot loops (pairwise squared distances, second-neighbor
scan, batch RK4 reactor integration) on representative problem sizes and
prints a comparison table.

    python bench/bench_backend.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from kgsa import _core_py

try:
    from kgsa import _core
except ImportError:
    _core = None


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    a1000 = rng.normal(size=(1000, 8))
    b1000 = rng.normal(size=(1000, 8))
    a3000 = rng.normal(size=(3000, 4))
    pts = rng.normal(size=(2000, 3))
    y0 = np.array([0.15, 0.375, 0.0, 0.0, 0.0])
    rates = np.abs(rng.normal(size=(1000, 4))) * np.array([0.4, 0.1, 3e-4, 5e-4])
    return [
        ("sqdist_cross 1000x1000x8", lambda m: m.sqdist_cross(a1000, b1000)),
        ("sqdist_cross 3000x3000x4", lambda m: m.sqdist_cross(a3000, a3000)),
        ("second_neighbors 2000x3", lambda m: m.second_neighbors(pts)),
        ("reactor_rk4 1000 draws x 2400 steps", lambda m: m.reactor_rk4(y0, rates, 1200.0, 2400)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    header = f"{'case':<38} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, runner in cases():
        t_py = best_time(lambda: runner(_core_py), args.repeats)
        if _core is None:
            print(f"{name:<38} {t_py * 1e3:>8.1f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_c = best_time(lambda: runner(_core), args.repeats)
        out_py = runner(_core_py)
        out_c = runner(_core)
        assert np.allclose(out_py, out_c, rtol=1e-12, atol=1e-15), f"backend mismatch in {name}"
        print(f"{name:<38} {t_py * 1e3:>8.1f}ms {t_c * 1e3:>8.1f}ms {t_py / t_c:>7.1f}x")
    if _core is None:
        print("\ncompiled core not built; showing fallback timings only")


if __name__ == "__main__":
    main()
