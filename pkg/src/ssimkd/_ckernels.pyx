# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled separable valid-mode correlation.

Summation order per output element matches ``_pykernels`` exactly (taps in
ascending order, starting from 0.0), so both backends agree bit for bit.
"""

import numpy as np


def correlate_sep(const double[:, :, ::1] x, const double[::1] w):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], wd = x.shape[2], f = w.shape[0]
    cdef Py_ssize_t oh = h - f + 1, ow = wd - f + 1
    cdef Py_ssize_t p, i, j, k
    cdef double acc, wk
    tmp_arr = np.empty((n, h, ow), dtype=np.float64)
    out_arr = np.zeros((n, oh, ow), dtype=np.float64)
    cdef double[:, :, ::1] tmp = tmp_arr
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for p in range(n):
            for i in range(h):
                for j in range(ow):
                    acc = 0.0
                    for k in range(f):
                        acc = acc + w[k] * x[p, i, j + k]
                    tmp[p, i, j] = acc
            for i in range(oh):
                for k in range(f):
                    wk = w[k]
                    for j in range(ow):
                        out[p, i, j] = out[p, i, j] + wk * tmp[p, i + k, j]
    return out_arr
