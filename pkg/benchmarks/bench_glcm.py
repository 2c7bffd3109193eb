"""Compare the compiled and pure-numpy co-occurrence kernels.

Run: python3 benchmarks/bench_glcm.py [--size 512] [--repeats 20]
The compiled path is skipped automatically when numba is unavailable or
disabled through AIF_DISABLE_NUMBA.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from aif.features import glcm_kernels


def bench(fn, levels, repeats):
    fn(levels, 0, 1, 8)  # includes any jit warm-up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(levels, 0, 1, 8)
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    levels = rng.integers(0, 8, size=(args.size, args.size))

    t_numpy = bench(glcm_kernels.cooccurrence_numpy, levels, args.repeats)
    print(f"numpy    kernel: {t_numpy * 1e3:8.3f} ms / call ({args.size}x{args.size})")

    if glcm_kernels.NUMBA_AVAILABLE:
        t_jit = bench(glcm_kernels._cooccurrence_jit, levels, args.repeats)
        print(f"numba    kernel: {t_jit * 1e3:8.3f} ms / call")
        print(f"speedup: {t_numpy / t_jit:.2f}x")
    else:
        print("numba    kernel: unavailable")
    print(f"dispatcher uses: {'numba' if glcm_kernels.USE_NUMBA else 'numpy'}")


if __name__ == "__main__":
    main()
