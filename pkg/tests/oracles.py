"""Slow, obviously-correct reference implementations used only by tests.

None of these call into ``fga``; they are plain loops over the defining sums.
"""
import cmath
import math

import numpy as np


def conv2d_loops(x, w, b):
    N, C, H, W = x.shape
    O, _, k, _ = w.shape
    p = k // 2
    out = np.zeros((N, O, H, W))
    for n in range(N):
        for o in range(O):
            for i in range(H):
                for j in range(W):
                    acc = b[o]
                    for c in range(C):
                        for di in range(k):
                            for dj in range(k):
                                ii, jj = i + di - p, j + dj - p
                                if 0 <= ii < H and 0 <= jj < W:
                                    acc += w[o, c, di, dj] * x[n, c, ii, jj]
                    out[n, o, i, j] = acc
    return out


def batchnorm_loops(x, gamma, beta, eps):
    N, C, H, W = x.shape
    out = np.zeros_like(x)
    for c in range(C):
        vals = [x[n, c, i, j] for n in range(N) for i in range(H) for j in range(W)]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        for n in range(N):
            for i in range(H):
                for j in range(W):
                    out[n, c, i, j] = gamma[c] * (x[n, c, i, j] - mean) / math.sqrt(var + eps) + beta[c]
    return out


def matmul_loops(a, b):
    M, K = a.shape
    _, P = b.shape
    out = np.zeros((M, P))
    for i in range(M):
        for j in range(P):
            out[i, j] = sum(a[i, k] * b[k, j] for k in range(K))
    return out


def dft1d(z, inverse=False):
    n = len(z)
    sign = 1 if inverse else -1
    out = [sum(z[j] * cmath.exp(sign * 2j * math.pi * (k * j % n) / n) for j in range(n))
           for k in range(n)]
    if inverse:
        out = [v / n for v in out]
    return np.array(out)


def dft2d(plane):
    H, W = plane.shape
    out = np.zeros((H, W), dtype=complex)
    for u in range(H):
        for v in range(W):
            acc = 0j
            for h in range(H):
                for w in range(W):
                    acc += plane[h, w] * cmath.exp(-2j * math.pi * ((u * h % H) / H + (v * w % W) / W))
            out[u, v] = acc
    return out


def circular_conv2d(a, b):
    H, W = a.shape
    out = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            out[i, j] = sum(a[p, q] * b[(i - p) % H, (j - q) % W] for p in range(H) for q in range(W))
    return out


def knn_brute(points, k):
    out = []
    for i, (xi, yi) in enumerate(points):
        d = sorted(math.sqrt((xi - xj) ** 2 + (yi - yj) ** 2)
                   for j, (xj, yj) in enumerate(points) if j != i)
        kk = min(k, len(d))
        out.append(sum(d[:kk]) / kk)
    return out


def gaussian_mass_in_box(x, y, sigma, w, h):
    """Integral of a unit-mass 2-D Gaussian at (x, y) over [0, w] x [0, h]."""
    def axis(c, hi):
        s = sigma * math.sqrt(2)
        return 0.5 * (math.erf((hi - c) / s) - math.erf((0 - c) / s))
    return axis(x, w) * axis(y, h)


def softmax_list(vals):
    m = max(vals)
    e = [math.exp(v - m) for v in vals]
    s = sum(e)
    return [v / s for v in e]


def spatial_attention_scalar(x, w1, b1, w2, b2, w3, b3, lam):
    """Single sample [C, H, W]; weights are [Cout, C] matrices."""
    C, H, W = x.shape
    M = H * W
    f = x.reshape(C, M)

    def proj(w, b):
        return [[sum(w[o, c] * f[c, m] for c in range(C)) + b[o] for m in range(M)]
                for o in range(w.shape[0])]

    s1, s2, s3 = proj(w1, b1), proj(w2, b2), proj(w3, b3)
    out = np.zeros((C, M))
    for n in range(M):
        logits = [sum(s1[c][m] * s2[c][n] for c in range(len(s1))) for m in range(M)]
        a = softmax_list(logits)  # a[m] = A[m, n], normalized over m
        for c in range(C):
            out[c, n] = lam * sum(a[m] * s3[c][m] for m in range(M)) + f[c, n]
    return out.reshape(C, H, W)


def channel_attention_scalar(x, mu):
    C, H, W = x.shape
    f = x.reshape(C, H * W)
    gram = [[sum(f[a, p] * f[b, p] for p in range(H * W)) for b in range(C)] for a in range(C)]
    out = np.zeros_like(f)
    for n in range(C):
        a = softmax_list([gram[m][n] for m in range(C)])
        for p in range(H * W):
            out[n, p] = mu * sum(a[m] * f[m, p] for m in range(C)) + f[n, p]
    return out.reshape(C, H, W)


def adam_scalar(p, grads, lr, b1, b2, eps, wd):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        p = p * (1 - lr * wd)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        p = p - lr * mh / (math.sqrt(vh) + eps)
    return p


def irfft2d_scalar(re, im, width):
    """Real inverse of a half spectrum [H, W//2+1] by expanding the mirror
    columns as conjugates and summing the inverse DFT term by term."""
    H, wf = re.shape
    full = {}
    for u in range(H):
        for v in range(width):
            if v < wf:
                full[u, v] = complex(re[u, v], im[u, v])
            else:
                uu, vv = (-u) % H, width - v
                full[u, v] = complex(re[uu, vv], -im[uu, vv])
    out = np.zeros((H, width))
    for h in range(H):
        for w in range(width):
            acc = 0j
            for (u, v), z in full.items():
                acc += z * cmath.exp(2j * math.pi * ((u * h % H) / H + (v * w % width) / width))
            out[h, w] = (acc / (H * width)).real
    return out
