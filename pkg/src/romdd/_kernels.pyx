# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Gauss-Seidel sweeps over a CSR matrix, updating ``x`` in place."""

cimport cython


def gs_sweep(const int[::1] indptr, const int[::1] indices, const double[::1] data,
             const double[::1] b, double[::1] x, bint reverse=False):
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t k, i, j, step
    cdef double s, d
    if reverse:
        i, step = n - 1, -1
    else:
        i, step = 0, 1
    for k in range(n):
        s = b[i]
        d = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            if indices[j] == i:
                d += data[j]
            else:
                s -= data[j] * x[indices[j]]
        x[i] = s / d
        i += step


def sgs_sweep(const int[::1] indptr, const int[::1] indices, const double[::1] data,
              const double[::1] b, double[::1] x):
    gs_sweep(indptr, indices, data, b, x, False)
    gs_sweep(indptr, indices, data, b, x, True)
