# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled bootstrap kernel: shrunk covariance per resample.

Same contract as ``_boot_py.bootstrap_covariances``; avoids materializing
the (n_boot, n, T) gather array.
"""

import numpy as np

cimport numpy as cnp


def bootstrap_covariances(double[:, ::1] resid, cnp.int64_t[:, ::1] idx, double lam):
    cdef Py_ssize_t n = resid.shape[0]
    cdef Py_ssize_t T = resid.shape[1]
    cdef Py_ssize_t n_boot = idx.shape[0]
    cdef Py_ssize_t s, i, j, t
    cdef double acc, mij
    cdef double off = 1.0 - lam
    cdef double inv_T = 1.0 / T
    cdef double inv_Tm1 = 1.0 / (T - 1)

    out_arr = np.empty((n_boot, n, n))
    cdef double[:, :, ::1] out = out_arr
    buf_arr = np.empty((n, T))
    cdef double[:, ::1] buf = buf_arr
    mu_arr = np.empty(n)
    cdef double[::1] mu = mu_arr

    for s in range(n_boot):
        for i in range(n):
            acc = 0.0
            for t in range(T):
                buf[i, t] = resid[i, idx[s, t]]
                acc += buf[i, t]
            mu[i] = acc * inv_T
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                for t in range(T):
                    acc += buf[i, t] * buf[j, t]
                mij = (acc - T * mu[i] * mu[j]) * inv_Tm1
                if i != j:
                    mij *= off
                out[s, i, j] = mij
                out[s, j, i] = mij
    return out_arr
