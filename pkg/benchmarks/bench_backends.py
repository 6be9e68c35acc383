"""Compare the compiled direct-sum correlation kernel with the FFT fallback.

Run:  python benchmarks/bench_backends.py

Prints per-shape timings and the agreement error. The direct sum wins on
short grids (no transform overhead); FFT wins once the grid is long, which
is what the default per-call dispatch encodes.
"""

import time

import numpy as np

from levyemm._backend import _ma_numpy

try:
    from levyemm._backend import _ma_ext
except ImportError:
    _ma_ext = None

SHAPES = [
    # (batch, m past cells, n_out grid points)
    (64, 240, 5),
    (64, 240, 64),
    (256, 240, 64),
    (64, 2560, 513),
    (16, 5120, 513),
]


def run_one(fn, inc, w, n_out, m, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(inc, w, n_out, m)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    rng = np.random.default_rng(7)
    print(f"{'B':>5} {'m':>6} {'n_out':>6} {'ext (ms)':>10} {'numpy (ms)':>11} "
          f"{'max |diff|':>12}")
    for B, m, n_out in SHAPES:
        N = n_out - 1 + m
        inc = np.ascontiguousarray(rng.standard_normal((B, N)))
        w = np.exp(-0.01 * np.arange(N + 1))
        t_np, out_np = run_one(_ma_numpy.ma_correlate, inc, w, n_out, m)
        if _ma_ext is not None:
            t_ext, out_ext = run_one(_ma_ext.ma_correlate, inc, w, n_out, m)
            diff = float(np.max(np.abs(out_ext - out_np)))
            print(f"{B:>5} {m:>6} {n_out:>6} {t_ext * 1e3:>10.3f} "
                  f"{t_np * 1e3:>11.3f} {diff:>12.3e}")
        else:
            print(f"{B:>5} {m:>6} {n_out:>6} {'absent':>10} "
                  f"{t_np * 1e3:>11.3f} {'n/a':>12}")


if __name__ == "__main__":
    main()
