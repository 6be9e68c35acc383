"""Pure-numpy fallback for the correlation kernel (FFT convolution)."""

import numpy as np
from scipy.signal import fftconvolve


def ma_correlate(inc: np.ndarray, w: np.ndarray, n_out: int, m: int) -> np.ndarray:
    inc = np.ascontiguousarray(inc, dtype=np.float64)
    B, N = inc.shape
    if n_out - 1 + m != N:
        raise ValueError("need inc.shape[1] == n_out - 1 + m")
    if w.shape[0] < N + 1:
        raise ValueError("weight table too short")
    w2 = np.array(w[: N + 1], dtype=np.float64)
    w2[0] = 0.0  # lag-0 weight never enters the left-point sum
    full = fftconvolve(inc, w2[None, :], axes=1)
    return np.ascontiguousarray(full[:, m : m + n_out])
