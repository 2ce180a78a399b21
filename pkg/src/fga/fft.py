"""Discrete Fourier transforms built on the radix-2 / direct-sum row kernel.

Convention: forward transforms are unscaled, inverse transforms carry the
1/n (1-D) or 1/(H*W) (2-D) factor.  Row index pairs with height, column
index with width.  Real 2-D transforms keep the Hermitian-reduced half
spectrum with ``W // 2 + 1`` columns.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class ComplexSpectrum:
    """Half spectrum of a real [N, C, H, W] tensor, last axis ``W // 2 + 1``."""

    re: np.ndarray
    im: np.ndarray
    orig_width: int

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise ValueError(f"re/im shape mismatch: {self.re.shape} vs {self.im.shape}")
        check_width(self.re.shape[-1], self.orig_width)

    @property
    def shape(self):
        return self.re.shape

    def full(self):
        """Expand to the full complex spectrum via conjugate symmetry."""
        z = self.re + 1j * self.im
        H = z.shape[-2]
        W = self.orig_width
        out = np.empty(z.shape[:-1] + (W,), dtype=complex)
        wf = z.shape[-1]
        out[..., :wf] = z
        for v in range(wf, W):
            rows = (-np.arange(H)) % H
            out[..., v] = np.conj(z[..., rows, W - v])
        return out


def check_width(wf, width):
    if width < 1 or wf != width // 2 + 1:
        raise ValueError(
            f"orig_width {width} is inconsistent with {wf} stored frequency columns "
            f"(expected {2 * (wf - 1)} or {2 * wf - 1})"
        )


def fft1d(re, im, inverse=False):
    """DFT (or inverse DFT, scaled 1/n) of one complex vector."""
    re = np.asarray(re, dtype=np.float64)
    im = np.asarray(im, dtype=np.float64)
    if re.ndim != 1 or re.shape != im.shape:
        raise ValueError(f"fft1d needs equal-length vectors, got {re.shape} and {im.shape}")
    if re.size < 1:
        raise ValueError("fft1d needs at least one sample")
    r, i = _kernels.fft_rows(re[None, :], im[None, :], inverse)
    return r[0], i[0]


def _fft_axis(re, im, axis, inverse):
    re = np.moveaxis(re, axis, -1)
    im = np.moveaxis(im, axis, -1)
    shape = re.shape
    r, i = _kernels.fft_rows(
        np.ascontiguousarray(re).reshape(-1, shape[-1]),
        np.ascontiguousarray(im).reshape(-1, shape[-1]),
        inverse,
    )
    return np.moveaxis(r.reshape(shape), -1, axis), np.moveaxis(i.reshape(shape), -1, axis)


def fft2(re, im, inverse=False):
    """Full complex 2-D transform over the last two axes."""
    re, im = _fft_axis(re, im, -1, inverse)
    return _fft_axis(re, im, -2, inverse)


def rfft2d(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise ValueError(f"rfft2d needs non-empty trailing H, W axes, got {x.shape}")
    W = x.shape[-1]
    wf = W // 2 + 1
    re, im = _fft_axis(x, np.zeros_like(x), -1, False)
    re, im = _fft_axis(re[..., :wf], im[..., :wf], -2, False)
    return ComplexSpectrum(np.ascontiguousarray(re), np.ascontiguousarray(im), W)


def _column_weights(wf, width):
    # each stored column stands for itself plus its mirror, except DC and Nyquist
    c = np.full(wf, 2.0)
    c[0] = 1.0
    if width % 2 == 0:
        c[-1] = 1.0
    return c


def _pad_width(a, width):
    out = np.zeros(a.shape[:-1] + (width,))
    out[..., :a.shape[-1]] = a
    return out


def irfft2d(s):
    """Real inverse of a half spectrum.

    Imaginary residue that a true Hermitian spectrum could not carry (the
    self-conjugate bins) is discarded, exactly as taking the real part of
    the symmetrized inverse would.
    """
    W = s.orig_width
    c = _column_weights(s.re.shape[-1], W)
    re, im = _fft_axis(s.re * c, s.im * c, -2, True)
    re, _ = _fft_axis(_pad_width(re, W), _pad_width(im, W), -1, True)
    return np.ascontiguousarray(re)


def rfft2d_adjoint(gre, gim, width):
    """Vector-Jacobian product of :func:`rfft2d` w.r.t. its real input."""
    H = gre.shape[-2]
    re, im = fft2(_pad_width(gre, width), _pad_width(gim, width), inverse=True)
    return re * (H * width)


def irfft2d_adjoint(g):
    """Vector-Jacobian product of :func:`irfft2d`; returns (d_re, d_im)."""
    H, W = g.shape[-2:]
    s = rfft2d(g)
    c = _column_weights(s.re.shape[-1], W) / (H * W)
    return s.re * c, s.im * c


def direct_dft2(x):
    """Full 2-D DFT of the trailing axes by explicit summation.

    Independent of the row kernels; used as the reference in self-tests.
    """
    x = np.asarray(x, dtype=np.float64)
    H, W = x.shape[-2:]
    h = np.arange(H)
    w = np.arange(W)
    eh = np.exp(-2j * np.pi * (np.outer(h, h) % H) / H)
    ew = np.exp(-2j * np.pi * (np.outer(w, w) % W) / W)
    out = np.zeros(x.shape, dtype=complex)
    for u in range(H):
        for v in range(W):
            out[..., u, v] = (x * eh[u][:, None] * ew[v][None, :]).sum(axis=(-2, -1))
    return out
