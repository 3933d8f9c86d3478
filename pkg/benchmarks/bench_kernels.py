"""Benchmark the numba kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--repeats 5]

Both backends are imported directly so a single process can time them side
by side; the numba path is warmed up first so JIT compilation is not
counted.
"""

import argparse
import time

import numpy as np

from satml.kernels import _numba, _numpy


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_split(repeats):
    rng = np.random.default_rng(0)
    print("best_split_feature (n rows, t targets, 200 calls)")
    for n, t in [(1_000, 1), (10_000, 1), (10_000, 4), (100_000, 1)]:
        x = np.sort(rng.normal(0, 1, n))
        y = rng.normal(0, 1, (n, t))

        def run(mod):
            for _ in range(200):
                mod.best_split_feature(x, y, 2)

        _numba.best_split_feature(x, y, 2)  # warm up JIT
        t_nb = timeit(lambda: run(_numba), repeats)
        t_np = timeit(lambda: run(_numpy), repeats)
        print(f"  n={n:>7} t={t}  numba {t_nb * 1e3:8.2f} ms"
              f"  numpy {t_np * 1e3:8.2f} ms  speedup {t_np / t_nb:5.2f}x")


def bench_kepler(repeats):
    rng = np.random.default_rng(1)
    print("solve_kepler (elements per call, 50 calls)")
    for n in [1_000, 100_000, 1_000_000]:
        M = rng.uniform(0, 2 * np.pi, n)

        def run(mod):
            for _ in range(50):
                mod.solve_kepler(M, 0.85)

        _numba.solve_kepler(M, 0.85)  # warm up JIT
        t_nb = timeit(lambda: run(_numba), repeats)
        t_np = timeit(lambda: run(_numpy), repeats)
        print(f"  n={n:>8}  numba {t_nb * 1e3:8.2f} ms"
              f"  numpy {t_np * 1e3:8.2f} ms  speedup {t_np / t_nb:5.2f}x")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    bench_split(args.repeats)
    bench_kepler(args.repeats)


if __name__ == "__main__":
    main()
