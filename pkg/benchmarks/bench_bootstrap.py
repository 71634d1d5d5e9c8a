"""Benchmark the compiled bootstrap kernel against the pure-Python fallback.

Both kernels compute per-resample shrunk covariances from the same
precomputed index matrix, so the comparison isolates kernel cost.

Usage:
    python3 benchmarks/bench_bootstrap.py [--n 8] [--T 96] [--n-boot 2000]
"""

import argparse
import time

import numpy as np

from hirec import _boot_py
from hirec.covariance import COMPILED_KERNEL

try:
    from hirec import _boot_cy
except ImportError:
    _boot_cy = None


def time_kernel(kernel, resid, idx, lam, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        start = time.perf_counter()
        out = kernel.bootstrap_covariances(resid, idx, lam)
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=8, help="number of series")
    parser.add_argument("--T", type=int, default=96, help="residual length")
    parser.add_argument("--n-boot", type=int, default=2000,
                        help="bootstrap resamples")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats (best is reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    resid = np.ascontiguousarray(rng.standard_normal((args.n, args.T)))
    idx = np.empty((args.n_boot, args.T), dtype=np.int64)
    for s in range(args.n_boot):
        idx[s] = np.random.default_rng([args.seed, s]).integers(
            0, args.T, size=args.T
        )
    lam = 0.3

    print(f"n={args.n} T={args.T} n_boot={args.n_boot} "
          f"compiled_kernel_available={COMPILED_KERNEL}")
    t_py, out_py = time_kernel(_boot_py, resid, idx, lam, args.repeats)
    print(f"pure python : {t_py * 1e3:9.2f} ms")
    if _boot_cy is None:
        print("compiled    : not built (pip install -e . --no-build-isolation)")
        return
    t_cy, out_cy = time_kernel(_boot_cy, resid, idx, lam, args.repeats)
    err = float(np.max(np.abs(out_py - out_cy)))
    print(f"compiled    : {t_cy * 1e3:9.2f} ms")
    print(f"speedup     : {t_py / t_cy:9.2f}x")
    print(f"max |diff|  : {err:.2e}")
    if err > 1e-10:
        raise SystemExit("kernel outputs disagree")


if __name__ == "__main__":
    main()
