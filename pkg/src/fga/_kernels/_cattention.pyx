# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused spatial-attention kernel.

Works one attention row at a time so the N x HW x HW maps are never
allocated: the forward keeps only each row's max and normaliser and the
backward recomputes the row.  Built with -ffast-math so the inner
reductions vectorize.  In isolation the numpy path's BLAS products are as
fast; the gain shows up in training, where the fallback has to allocate
and fault in the full maps every step.
"""
import numpy as np
from libc.math cimport exp


cdef inline void _logits(double* row, const double* s1, const double* s2, Py_ssize_t n,
                         Py_ssize_t Cr, Py_ssize_t M) noexcept nogil:
    # row[m] = sum_c s2[c, n] * s1[c, m]
    cdef Py_ssize_t c, m
    cdef double a
    cdef const double* x
    for m in range(M):
        row[m] = 0.0
    for c in range(Cr):
        a = s2[c * M + n]
        x = s1 + c * M
        for m in range(M):
            row[m] += a * x[m]


def spatial_attention_forward(s1_, s2_, s3_):
    cdef double[:, :, ::1] s1 = np.ascontiguousarray(s1_, dtype=np.float64)
    cdef double[:, :, ::1] s2 = np.ascontiguousarray(s2_, dtype=np.float64)
    cdef double[:, :, ::1] s3 = np.ascontiguousarray(s3_, dtype=np.float64)
    cdef Py_ssize_t N = s3.shape[0], C = s3.shape[1], M = s3.shape[2], Cr = s1.shape[1]
    mixed_ = np.empty((N, C, M))
    rowmax_ = np.empty((N, M))
    rowinv_ = np.empty((N, M))
    cdef double[::1] row_ = np.empty(max(M, 1))
    cdef double[:, :, ::1] mixed = mixed_
    cdef double[:, ::1] rowmax = rowmax_
    cdef double[:, ::1] rowinv = rowinv_
    cdef double* row = &row_[0]
    cdef Py_ssize_t i, n, m, c
    cdef double mx, s, acc
    cdef const double* x
    if N == 0 or M == 0:
        return mixed_, (rowmax_, rowinv_)
    with nogil:
        for i in range(N):
            for n in range(M):
                _logits(row, &s1[i, 0, 0], &s2[i, 0, 0], n, Cr, M)
                mx = row[0]
                for m in range(1, M):
                    mx = row[m] if row[m] > mx else mx
                s = 0.0
                for m in range(M):
                    row[m] = exp(row[m] - mx)
                for m in range(M):
                    s += row[m]
                s = 1.0 / s
                rowmax[i, n] = mx
                rowinv[i, n] = s
                for c in range(C):
                    x = &s3[i, c, 0]
                    acc = 0.0
                    for m in range(M):
                        acc += x[m] * row[m]
                    mixed[i, c, n] = acc * s
    return mixed_, (rowmax_, rowinv_)


def spatial_attention_backward(dmixed_, s1_, s2_, s3_, saved):
    cdef double[:, :, ::1] d = np.ascontiguousarray(dmixed_, dtype=np.float64)
    cdef double[:, :, ::1] s1 = np.ascontiguousarray(s1_, dtype=np.float64)
    cdef double[:, :, ::1] s2 = np.ascontiguousarray(s2_, dtype=np.float64)
    cdef double[:, :, ::1] s3 = np.ascontiguousarray(s3_, dtype=np.float64)
    cdef double[:, ::1] rowmax = saved[0]
    cdef double[:, ::1] rowinv = saved[1]
    cdef Py_ssize_t N = s3.shape[0], C = s3.shape[1], M = s3.shape[2], Cr = s1.shape[1]
    ds1_ = np.zeros((N, Cr, M))
    ds2_ = np.zeros((N, Cr, M))
    ds3_ = np.zeros((N, C, M))
    cdef double[::1] p_ = np.empty(max(M, 1))
    cdef double[::1] g_ = np.empty(max(M, 1))
    cdef double[:, :, ::1] ds1 = ds1_
    cdef double[:, :, ::1] ds2 = ds2_
    cdef double[:, :, ::1] ds3 = ds3_
    cdef double* p = &p_[0]
    cdef double* g = &g_[0]
    cdef Py_ssize_t i, n, m, c
    cdef double a, dot, mx, inv, acc
    cdef const double* x
    cdef double* y
    if N == 0 or M == 0:
        return ds1_, ds2_, ds3_
    with nogil:
        for i in range(N):
            for n in range(M):
                mx = rowmax[i, n]
                inv = rowinv[i, n]
                _logits(p, &s1[i, 0, 0], &s2[i, 0, 0], n, Cr, M)
                for m in range(M):
                    p[m] = exp(p[m] - mx) * inv
                    g[m] = 0.0
                # g = d(loss)/d(P row), accumulate the s3 gradient on the way
                for c in range(C):
                    a = d[i, c, n]
                    x = &s3[i, c, 0]
                    y = &ds3[i, c, 0]
                    for m in range(M):
                        g[m] += a * x[m]
                        y[m] += a * p[m]
                dot = 0.0
                for m in range(M):
                    dot += g[m] * p[m]
                for m in range(M):
                    g[m] = p[m] * (g[m] - dot)
                for c in range(Cr):
                    a = s2[i, c, n]
                    x = &s1[i, c, 0]
                    y = &ds1[i, c, 0]
                    acc = 0.0
                    for m in range(M):
                        y[m] += a * g[m]
                        acc += x[m] * g[m]
                    ds2[i, c, n] = acc
    return ds1_, ds2_, ds3_
