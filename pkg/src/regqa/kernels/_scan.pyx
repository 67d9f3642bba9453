# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled cosine-scan kernel for the brute-force vector search.

The dot product runs four independent accumulator chains so the C
compiler can pipeline (and at -O3 vectorize) the reduction.
"""
import numpy as np


def cosine_scan(const double[:, ::1] matrix, const double[::1] norms,
                const double[::1] query, double query_norm):
    """Cosine similarity of ``query`` against every row of ``matrix``."""
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc0, acc1, acc2, acc3
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] view = out
    for i in range(n):
        acc0 = acc1 = acc2 = acc3 = 0.0
        j = 0
        while j + 4 <= d:
            acc0 = acc0 + matrix[i, j] * query[j]
            acc1 = acc1 + matrix[i, j + 1] * query[j + 1]
            acc2 = acc2 + matrix[i, j + 2] * query[j + 2]
            acc3 = acc3 + matrix[i, j + 3] * query[j + 3]
            j += 4
        while j < d:
            acc0 = acc0 + matrix[i, j] * query[j]
            j += 1
        view[i] = (acc0 + acc1 + acc2 + acc3) / (norms[i] * query_norm)
    return out
