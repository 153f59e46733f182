"""Time the flux/time-derivative kernel under both backends.

Usage: python3 benchmarks/bench_kernels.py [--sizes 32 64 128] [--repeat 5]

Runs rhs_kernel on 2D grid states of increasing size, checks that the two
backends agree, and prints the median wall time per call.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from rel_euler._backend import HAVE_NUMBA
from rel_euler.dynamics import rhs_kernel, smooth_random_state
from rel_euler.fields import Grid, gradient


def bench(n: int, repeat: int, backends) -> dict:
    grid = Grid(2, n)
    U = smooth_random_state(grid, seed=1, amplitude=0.1)
    dU = gradient(U, grid)
    N = grid.npoints
    Uf, dUf = U.reshape(4, N), dU.reshape(3, 4, N)
    out = {}
    ref = None
    for b in backends:
        rhs_kernel(Uf, dUf, 2.0, b)  # warm-up (numba compile / cache load)
        times = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            r = rhs_kernel(Uf, dUf, 2.0, b)
            times.append(time.perf_counter() - t0)
        out[b] = statistics.median(times)
        if ref is None:
            ref = r
        else:
            out["max_diff"] = float(np.max(np.abs(r - ref)))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["numpy", "numba"] if HAVE_NUMBA else ["numpy"]
    print(f"{'grid':>10} " + " ".join(f"{b + ' [ms]':>12}" for b in backends) + f" {'speedup':>8} {'max diff':>10}")
    for n in args.sizes:
        r = bench(n, args.repeat, backends)
        cols = " ".join(f"{1e3 * r[b]:12.3f}" for b in backends)
        speed = f"{r['numpy'] / r['numba']:8.1f}" if "numba" in r else f"{'-':>8}"
        diff = f"{r.get('max_diff', 0.0):10.2e}"
        print(f"{n:>5}x{n:<4} {cols} {speed} {diff}")


if __name__ == "__main__":
    main()
