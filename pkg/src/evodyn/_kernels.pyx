# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled mean-field kernels for the BNN and Smith dynamics."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def bnn_field(double[::1] x, double[::1] rho, double[::1] lam):
    """Excess-payoff field: lam_i e_i mass(x) - x_i <lam, e>."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef double mean = 0.0, mass = 0.0, lam_e = 0.0, e
    for i in range(n):
        mean += rho[i] * x[i]
        mass += x[i]
    for i in range(n):
        e = rho[i] - mean
        if e < 0.0:
            e = 0.0
        lam_e += lam[i] * e
        ov[i] = lam[i] * e * mass
    for i in range(n):
        ov[i] -= x[i] * lam_e
    return out


def smith_field(double[::1] x, double[::1] rho, double[::1] lam):
    """Pairwise field with rate max{0, rho_target - rho_source}."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double ri, d, acc_in, acc_out
    for i in range(n):
        ri = rho[i]
        acc_in = 0.0
        acc_out = 0.0
        for j in range(n):
            d = ri - rho[j]
            if d > 0.0:
                acc_in += d * x[j]
            elif d < 0.0:
                acc_out -= d * lam[j]
        ov[i] = lam[i] * acc_in - x[i] * acc_out
    return out
