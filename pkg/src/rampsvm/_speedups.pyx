# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementations of the simplex hot kernels."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def eliminate(cnp.ndarray[cnp.float64_t, ndim=2] T,
              cnp.ndarray[cnp.float64_t, ndim=1] zrow,
              Py_ssize_t r, Py_ssize_t q):
    """Pivot on (r, q): normalize row r, clear column q from all other rows
    and from the reduced-cost row. T and zrow are updated in place.

    Rows whose multiplier is (near) zero are skipped, which the dense numpy
    rank-1 update cannot do; on the sparse tableaus the strategies generate
    this saves most of the work.
    """
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t n = T.shape[1]
    cdef double piv = T[r, q]
    cdef double inv = 1.0 / piv
    cdef double f
    cdef Py_ssize_t i, j
    for j in range(n):
        T[r, j] *= inv
    for i in range(m):
        if i == r:
            continue
        f = T[i, q]
        if f == 0.0:
            continue
        for j in range(n):
            T[i, j] -= f * T[r, j]
        T[i, q] = 0.0
    T[r, q] = 1.0
    f = zrow[q]
    if f != 0.0:
        for j in range(n):
            zrow[j] -= f * T[r, j]
        zrow[q] = 0.0
