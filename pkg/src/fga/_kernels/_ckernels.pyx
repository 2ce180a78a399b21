# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same signatures as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, floor, ceil, M_PI

cnp.import_array()

from . import _pykernels

NAME = "cython"


cdef void _radix2_row(double* re, double* im, Py_ssize_t n,
                      const Py_ssize_t* rev, const double* wr, const double* wi) noexcept nogil:
    cdef Py_ssize_t i, j, m, half, start, k, step
    cdef double tr, ti, ur, ui, cr, ci
    for i in range(n):
        j = rev[i]
        if j > i:
            tr = re[i]; re[i] = re[j]; re[j] = tr
            ti = im[i]; im[i] = im[j]; im[j] = ti
    m = 2
    while m <= n:
        half = m >> 1
        step = n // m
        start = 0
        while start < n:
            for k in range(half):
                # twiddle table holds exp(+-2*pi*i*t/n); stage m uses every step-th entry
                cr = wr[k * step]
                ci = wi[k * step]
                i = start + k
                j = i + half
                tr = re[j] * cr - im[j] * ci
                ti = re[j] * ci + im[j] * cr
                ur = re[i]
                ui = im[i]
                re[i] = ur + tr
                im[i] = ui + ti
                re[j] = ur - tr
                im[j] = ui - ti
            start += m
        m <<= 1


def fft_rows(re, im, inverse):
    n0 = np.shape(re)[1]
    if n0 & (n0 - 1):
        # the O(n^2) sum is a dense matrix product; BLAS beats a scalar loop here
        return _pykernels.fft_rows(re, im, inverse)
    cdef cnp.ndarray[double, ndim=2, mode="c"] ore = np.array(re, dtype=np.float64, order="C", copy=True)
    cdef cnp.ndarray[double, ndim=2, mode="c"] oim = np.array(im, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t rows = ore.shape[0]
    cdef Py_ssize_t n = ore.shape[1]
    cdef double sign = 1.0 if inverse else -1.0
    cdef Py_ssize_t r, k, b, bits, v
    cdef double inv_n = 1.0 / n
    cdef double ang
    cdef cnp.ndarray[Py_ssize_t, ndim=1] rev
    cdef cnp.ndarray[double, ndim=1] wr, wi

    if n == 0 or rows == 0:
        return ore, oim
    bits = 0
    while (1 << bits) < n:
        bits += 1
    rev = np.zeros(n, dtype=np.intp)
    for k in range(n):
        v = 0
        for b in range(bits):
            v |= ((k >> b) & 1) << (bits - 1 - b)
        rev[k] = v
    wr = np.empty(max(n // 2, 1))
    wi = np.empty(max(n // 2, 1))
    for k in range(n // 2):
        ang = 2.0 * M_PI * k / n
        wr[k] = cos(ang)
        wi[k] = sign * sin(ang)
    with nogil:
        for r in range(rows):
            _radix2_row(&ore[r, 0], &oim[r, 0], n, &rev[0], &wr[0], &wi[0])
    if inverse:
        with nogil:
            for r in range(rows):
                for k in range(n):
                    ore[r, k] *= inv_n
                    oim[r, k] *= inv_n
    return ore, oim


def im2col(xpad, int k, int H, int W):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(xpad, dtype=np.float64)
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1]
    out = np.empty((N, C * k * k, H * W))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t n, c, di, dj, i, j, row
    with nogil:
        for n in range(N):
            for c in range(C):
                for di in range(k):
                    for dj in range(k):
                        row = (c * k + di) * k + dj
                        for i in range(H):
                            for j in range(W):
                                o[n, row, i * W + j] = x[n, c, i + di, j + dj]
    return out


def col2im(cols, int C, int H, int W, int k):
    cdef double[:, :, ::1] cl = np.ascontiguousarray(cols, dtype=np.float64)
    cdef Py_ssize_t N = cl.shape[0]
    out = np.zeros((N, C, H + k - 1, W + k - 1))
    cdef double[:, :, :, ::1] o = out
    cdef Py_ssize_t n, c, di, dj, i, j, row
    with nogil:
        for n in range(N):
            for c in range(C):
                for di in range(k):
                    for dj in range(k):
                        row = (c * k + di) * k + dj
                        for i in range(H):
                            for j in range(W):
                                o[n, c, i + di, j + dj] += cl[n, row, i * W + j]
    return out


def stamp_gaussians(double[:, ::1] grid, xs, ys, sigmas, double trunc, bint renormalize):
    cdef double[::1] px = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] py = np.ascontiguousarray(ys, dtype=np.float64)
    cdef double[::1] ps = np.ascontiguousarray(sigmas, dtype=np.float64)
    cdef Py_ssize_t H = grid.shape[0], W = grid.shape[1]
    cdef Py_ssize_t p, i, j, i0, i1, j0, j1, hi, hj
    cdef double x, y, s, r, dy, dx, d2, total, scale
    cdef Py_ssize_t npts = px.shape[0]
    buf = np.zeros((H, W))
    cdef double[:, ::1] g = buf
    for p in range(npts):
        x = px[p]; y = py[p]; s = ps[p]
        r = trunc * s
        i0 = max(<Py_ssize_t>floor(y - 0.5 - r), 0)
        i1 = min(<Py_ssize_t>ceil(y - 0.5 + r), H - 1)
        j0 = max(<Py_ssize_t>floor(x - 0.5 - r), 0)
        j1 = min(<Py_ssize_t>ceil(x - 0.5 + r), W - 1)
        if i1 < i0 or j1 < j0:
            continue
        total = 0.0
        for i in range(i0, i1 + 1):
            dy = i + 0.5 - y
            for j in range(j0, j1 + 1):
                dx = j + 0.5 - x
                d2 = dy * dy + dx * dx
                if d2 <= r * r:
                    g[i, j] = exp(-d2 / (2.0 * s * s))
                    total += g[i, j]
                else:
                    g[i, j] = 0.0
        if renormalize:
            if total > 0.0:
                scale = 1.0 / total
            else:
                hi = min(<Py_ssize_t>y, H - 1)
                hj = min(<Py_ssize_t>x, W - 1)
                grid[hi, hj] += 1.0
                continue
        else:
            scale = 1.0 / (2.0 * M_PI * s * s)
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                grid[i, j] += g[i, j] * scale
    return np.asarray(grid)
