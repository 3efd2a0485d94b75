# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Ryser permanent with Gray-code subset enumeration."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def permanent(a):
    """Permanent of a square complex matrix.

    Parameters
    ----------
    a : array_like, shape (n, n)

    Returns
    -------
    complex
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] m = np.ascontiguousarray(a, dtype=np.complex128)
    cdef Py_ssize_t n = m.shape[0]
    if m.shape[1] != n:
        raise ValueError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0.0j
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] rows = np.zeros(n, dtype=np.complex128)
    cdef double complex total = 0
    cdef double complex prod
    cdef unsigned long long k, gray, prev = 0, diff
    cdef unsigned long long limit = (<unsigned long long>1) << n
    cdef Py_ssize_t i, j
    cdef int sign = 1
    cdef int popcount = 0
    for k in range(1, limit):
        gray = k ^ (k >> 1)
        diff = gray ^ prev
        j = 0
        while (diff >> j) != 1:
            j += 1
        if gray & diff:
            for i in range(n):
                rows[i] = rows[i] + m[i, j]
            popcount += 1
        else:
            for i in range(n):
                rows[i] = rows[i] - m[i, j]
            popcount -= 1
        prev = gray
        prod = 1
        for i in range(n):
            prod = prod * rows[i]
        if (n - popcount) % 2:
            total = total - prod
        else:
            total = total + prod
    return complex(total)
