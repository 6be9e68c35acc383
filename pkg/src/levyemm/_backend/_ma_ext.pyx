# cython: boundscheck=False, wraparound=False, cdivision=True
"""Direct-sum correlation kernel for moving-average evaluation.

out[b, k] = sum_{j=1}^{k+m} w[j] * inc[b, k+m-j]

where inc holds per-cell increments on the two-sided lattice and w[j] is
the kernel sampled at lag j*dt.
"""

import numpy as np


def ma_correlate(double[:, ::1] inc, double[::1] w, int n_out, int m):
    cdef Py_ssize_t B = inc.shape[0]
    cdef Py_ssize_t N = inc.shape[1]
    if n_out - 1 + m != N:
        raise ValueError("need inc.shape[1] == n_out - 1 + m")
    if w.shape[0] < N + 1:
        raise ValueError("weight table too short")
    out_arr = np.zeros((B, n_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t b, k, i, top
    cdef double s
    with nogil:
        for b in range(B):
            for k in range(n_out):
                top = k + m
                s = 0.0
                for i in range(top):
                    s += w[top - i] * inc[b, i]
                out[b, k] = s
    return out_arr
