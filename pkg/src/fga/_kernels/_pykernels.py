"""Pure numpy implementations of the hot kernels.

These are the reference fallback used when the compiled extension is not
available (or when ``FGA_PURE_PYTHON=1``).  Every function here has a twin
with the same signature in ``_ckernels.pyx``.
"""
import math

import numpy as np

NAME = "python"


def _bit_reverse(n):
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.intp)
    idx = np.arange(n)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _twiddles(m, sign):
    k = np.arange(m // 2)
    ang = 2.0 * np.pi * k / m
    return np.cos(ang) + sign * 1j * np.sin(ang)


def _dft_matrix(n, sign):
    k = np.arange(n)
    # reduce k*j mod n before scaling so the angle stays in [0, 2pi)
    ang = 2.0 * np.pi * (np.outer(k, k) % n) / n
    return np.cos(ang) + sign * 1j * np.sin(ang)


def fft_rows(re, im, inverse):
    """Transform every row of the (R, n) arrays ``re`` + i*``im``.

    Power-of-two lengths use an iterative radix-2 decimation-in-time
    Cooley-Tukey transform; any other length uses the direct O(n^2) sum.
    The inverse is scaled by 1/n.
    """
    re = np.asarray(re, dtype=np.float64)
    im = np.asarray(im, dtype=np.float64)
    rows, n = re.shape
    sign = 1.0 if inverse else -1.0
    x = re + 1j * im
    if n & (n - 1) == 0:
        x = x[:, _bit_reverse(n)]
        m = 2
        while m <= n:
            half = m // 2
            w = _twiddles(m, sign)
            x = x.reshape(rows, n // m, m)
            u = x[:, :, :half]
            t = x[:, :, half:] * w
            x = np.concatenate((u + t, u - t), axis=2)
            m <<= 1
        x = x.reshape(rows, n)
    else:
        x = x @ _dft_matrix(n, sign).T
    if inverse:
        x = x / n
    return np.ascontiguousarray(x.real), np.ascontiguousarray(x.imag)


def im2col(xpad, k, H, W):
    """Unfold a zero-padded (N, C, H+k-1, W+k-1) batch into (N, C*k*k, H*W)."""
    N, C = xpad.shape[:2]
    cols = np.empty((N, C, k, k, H, W))
    for di in range(k):
        for dj in range(k):
            cols[:, :, di, dj] = xpad[:, :, di:di + H, dj:dj + W]
    return cols.reshape(N, C * k * k, H * W)


def col2im(cols, C, H, W, k):
    """Adjoint of :func:`im2col`; returns the padded-input gradient."""
    N = cols.shape[0]
    cols = cols.reshape(N, C, k, k, H, W)
    out = np.zeros((N, C, H + k - 1, W + k - 1))
    for di in range(k):
        for dj in range(k):
            out[:, :, di:di + H, dj:dj + W] += cols[:, :, di, dj]
    return out


def stamp_gaussians(grid, xs, ys, sigmas, trunc, renormalize):
    """Accumulate one isotropic Gaussian per point into ``grid`` in place.

    Pixel (i, j) is sampled at its center (j + 0.5, i + 0.5).  Only centers
    within ``trunc * sigma`` of the point receive mass.
    """
    H, W = grid.shape
    for x, y, s in zip(xs, ys, sigmas):
        r = trunc * s
        i0 = max(int(math.floor(y - 0.5 - r)), 0)
        i1 = min(int(math.ceil(y - 0.5 + r)), H - 1)
        j0 = max(int(math.floor(x - 0.5 - r)), 0)
        j1 = min(int(math.ceil(x - 0.5 + r)), W - 1)
        if i1 < i0 or j1 < j0:
            continue
        dy = np.arange(i0, i1 + 1) + 0.5 - y
        dx = np.arange(j0, j1 + 1) + 0.5 - x
        d2 = dy[:, None] ** 2 + dx[None, :] ** 2
        g = np.where(d2 <= r * r, np.exp(-d2 / (2.0 * s * s)), 0.0)
        if renormalize:
            total = g.sum()
            if total > 0.0:
                grid[i0:i1 + 1, j0:j1 + 1] += g / total
            else:
                # stamp narrower than a pixel: all mass to the host pixel
                grid[min(int(y), H - 1), min(int(x), W - 1)] += 1.0
        else:
            grid[i0:i1 + 1, j0:j1 + 1] += g / (2.0 * math.pi * s * s)
    return grid


def spatial_attention_forward(s1, s2, s3):
    """Row-softmax attention mix for a batch.

    ``s1``, ``s2`` are [N, Cr, M] projections, ``s3`` is [N, C, M].  With
    ``P[n, m] = softmax_m(<s2[:, n], s1[:, m]>)`` returns ``mixed[c, n] =
    sum_m s3[c, m] P[n, m]`` and the saved state for the backward pass.
    """
    N, C, M = s3.shape
    mixed = np.empty((N, C, M))
    P = np.empty((N, M, M))
    for i in range(N):
        L = P[i]
        np.matmul(s2[i].T, s1[i], out=L)
        L -= L.max(axis=1, keepdims=True)
        np.exp(L, out=L)
        L /= L.sum(axis=1, keepdims=True)
        np.matmul(s3[i], L.T, out=mixed[i])
    return mixed, P


def spatial_attention_backward(dmixed, s1, s2, s3, saved):
    P = saved
    ds1 = np.empty_like(s1)
    ds2 = np.empty_like(s2)
    ds3 = np.empty_like(s3)
    for i in range(len(P)):
        Pi = P[i]
        np.matmul(dmixed[i], Pi, out=ds3[i])
        dL = dmixed[i].T @ s3[i]
        dL -= (dL * Pi).sum(axis=1, keepdims=True)
        dL *= Pi
        np.matmul(s2[i], dL, out=ds1[i])
        np.matmul(s1[i], dL.T, out=ds2[i])
    return ds1, ds2, ds3
