# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled level-recursion kernels.

Same contracts as :mod:`lctrunc._pykernels`; the per-level work calls BLAS
``dgemm`` and LAPACK ``dgetrf``/``dgetrs`` directly so that small blocks do
not pay numpy's per-call overhead.  Buffers are C-ordered, which LAPACK sees
as the transpose; every call below is written with that in mind.
"""

import numpy as np
cimport numpy as cnp
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dgetrf, dgetrs

from .errors import SingularityError

cnp.import_array()


cdef int _right_solve(double* x, const double* p, double* out, int m, int* ipiv) noexcept nogil:
    # out = p @ inv(x); x is overwritten by its LU factors.
    # Fortran sees x^T and p^T, so solve x^T out^T = p^T.
    cdef int info = 0
    cdef int nrhs = m
    cdef char trans = b'N'
    memcpy(out, p, m * m * sizeof(double))
    dgetrf(&m, &m, x, &m, ipiv, &info)
    if info != 0:
        return info
    dgetrs(&trans, &m, &nrhs, x, &m, ipiv, out, &m, &info)
    return info


def rmatrix_backward(const double[:, :, ::1] ap, const double[:, :, ::1] dg,
                     const double[:, :, ::1] am, const double[:, ::1] terminal, int lo):
    cdef int hi = ap.shape[0]
    cdef int m = ap.shape[1]
    out_arr = np.zeros((hi, m, m))
    if hi <= lo:
        return out_arr
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] work = np.empty((m, m))
    cdef int[::1] ipiv = np.empty(m, dtype=np.intc)
    cdef int l, info
    cdef int mm = m
    cdef char nn = b'N'
    cdef double minus_one = -1.0, one = 1.0
    with nogil:
        memcpy(&work[0, 0], &terminal[0, 0], m * m * sizeof(double))
        info = _right_solve(&work[0, 0], &ap[hi - 1, 0, 0], &out[hi - 1, 0, 0], m, &ipiv[0])
    if info != 0:
        raise SingularityError(f"singular pivot block at level {hi}")
    l = hi - 2
    while l >= lo:
        with nogil:
            memcpy(&work[0, 0], &dg[l + 1, 0, 0], m * m * sizeof(double))
            # work^T -= am[l+2]^T @ out[l+1]^T  (i.e. work -= out[l+1] @ am[l+2])
            dgemm(&nn, &nn, &mm, &mm, &mm, &minus_one, &am[l + 2, 0, 0], &mm,
                  &out[l + 1, 0, 0], &mm, &one, &work[0, 0], &mm)
            info = _right_solve(&work[0, 0], &ap[l, 0, 0], &out[l, 0, 0], m, &ipiv[0])
        if info != 0:
            raise SingularityError(f"singular pivot block at level {l + 1}")
        l -= 1
    return out_arr


def forward_rows(const double[:, ::1] x0, const double[:, :, ::1] r, int lo, int hi):
    cdef int rows = x0.shape[0]
    cdef int m = x0.shape[1]
    cdef int steps = hi - lo
    out_arr = np.empty((steps + 1, rows, m))
    cdef double[:, :, ::1] out = out_arr
    out[0, :, :] = x0
    cdef int j
    cdef char nn = b'N'
    cdef double one = 1.0, zero = 0.0
    with nogil:
        for j in range(steps):
            # out[j+1]^T = r[lo+j]^T @ out[j]^T
            dgemm(&nn, &nn, &m, &rows, &m, &one, &r[lo + j, 0, 0], &m,
                  &out[j, 0, 0], &m, &zero, &out[j + 1, 0, 0], &m)
    return out_arr


def sweep_colmin(const double[:, ::1] x0, const double[:, :, ::1] r, int lo, int hi):
    cdef int rows = x0.shape[0]
    cdef int m = x0.shape[1]
    cdef int steps = hi - lo if hi > lo else 0
    out_arr = np.empty((steps, m))
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] a = np.array(x0, dtype=np.float64, order='C')
    cdef double[:, ::1] b = np.empty((rows, m))
    cdef double[:, ::1] tmp
    cdef int j, i, c
    cdef double v
    cdef char nn = b'N'
    cdef double one = 1.0, zero = 0.0
    for j in range(steps):
        with nogil:
            dgemm(&nn, &nn, &m, &rows, &m, &one, &r[lo + j, 0, 0], &m,
                  &a[0, 0], &m, &zero, &b[0, 0], &m)
            for c in range(m):
                out[j, c] = b[0, c]
            for i in range(1, rows):
                for c in range(m):
                    v = b[i, c]
                    if v < out[j, c]:
                        out[j, c] = v
        tmp = a
        a = b
        b = tmp
    return out_arr
