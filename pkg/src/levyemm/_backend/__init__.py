"""Backend selection for the hot correlation kernel.

The compiled extension computes the direct sum (quadratic in the grid
length, negligible overhead, fastest on short grids); the numpy fallback
goes through FFT convolution (n log n, wins on long grids). By default the
dispatch picks per call on an operation-count estimate; set LEVYEMM_BACKEND
to "numpy" or "ext" to force one side. Both implement the same contract
(see _ma_numpy.ma_correlate) and are compared in benchmarks/bench_backends.py.
"""

import os

from . import _ma_numpy

try:
    from . import _ma_ext

    _HAVE_EXT = True
except ImportError:
    _ma_ext = None
    _HAVE_EXT = False

# direct-sum flop count per batch row above which FFT wins comfortably
# (measured crossover, see benchmarks/bench_backends.py)
_DIRECT_SUM_CUTOFF = 10_000

_choice = os.environ.get("LEVYEMM_BACKEND", "")
if _choice == "ext" and not _HAVE_EXT:
    raise ImportError("LEVYEMM_BACKEND=ext but the extension is not built")
if _choice not in ("", "ext", "numpy"):
    raise ImportError(f"unknown LEVYEMM_BACKEND value {_choice!r}")


def ma_correlate(inc, w, n_out, m):
    if _choice == "ext":
        return _ma_ext.ma_correlate(inc, w, n_out, m)
    if _choice == "numpy" or not _HAVE_EXT:
        return _ma_numpy.ma_correlate(inc, w, n_out, m)
    if n_out * (m + n_out // 2) <= _DIRECT_SUM_CUTOFF:
        return _ma_ext.ma_correlate(inc, w, n_out, m)
    return _ma_numpy.ma_correlate(inc, w, n_out, m)


def backend_name() -> str:
    if _choice == "numpy" or not _HAVE_EXT:
        return "numpy"
    if _choice == "ext":
        return "ext"
    return "auto"


def available_backends() -> list:
    return ["ext", "numpy"] if _HAVE_EXT else ["numpy"]
