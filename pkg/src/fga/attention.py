"""Spatial (pixel-to-pixel) and channel (Gram) attention with residual gates.

Both attention maps are normalized over the *influencing* index m: entry
``A[m, n]`` is how much pixel (or channel) m contributes to n, and every
column of ``A`` sums to one.  Internally the maps are held transposed, as
row-stochastic ``P = A.T``, so a plain last-axis softmax applies.
"""
import numpy as np

from . import _kernels, ops
from .nn import Conv2d, Module, Param


def reduced_channels(channels, reduction=8):
    if reduction < 1:
        raise ValueError(f"reduction must be >= 1, got {reduction}")
    return max(channels // reduction, 1)


class SpatialAttention(Module):
    """HW x HW attention from 1x1 projections, gated by ``lambda_gate``."""

    _kernels = _kernels

    def __init__(self, channels, rng, reduction=8):
        cr = reduced_channels(channels, reduction)
        self.w_s1 = Conv2d(channels, cr, 1, rng)
        self.w_s2 = Conv2d(channels, cr, 1, rng)
        self.w_s3 = Conv2d(channels, channels, 1, rng)
        self.lambda_gate = Param(np.zeros(1))
        self._cache = None

    def attention_map(self, x):
        """Per-sample map ``A[m, n]`` of shape [N, HW, HW], columns sum to 1."""
        N, _, H, W = x.shape
        s1 = ops.conv2d(x, self.w_s1.weight.value, self.w_s1.bias.value).reshape(N, -1, H * W)
        s2 = ops.conv2d(x, self.w_s2.weight.value, self.w_s2.bias.value).reshape(N, -1, H * W)
        return np.swapaxes(ops.softmax_rows(np.matmul(np.swapaxes(s2, 1, 2), s1)), 1, 2)

    def forward(self, x):
        N, C, H, W = x.shape
        s1 = self.w_s1.forward(x).reshape(N, -1, H * W)
        s2 = self.w_s2.forward(x).reshape(N, -1, H * W)
        s3 = self.w_s3.forward(x).reshape(N, C, H * W)
        # logits[n, m] = <s1[:, m], s2[:, n]>; softmax over m
        mixed, saved = self._kernels.spatial_attention_forward(s1, s2, s3)
        self._cache = (s1, s2, s3, saved, mixed, x.shape)
        return (self.lambda_gate.value * mixed).reshape(x.shape) + x

    def backward(self, dout):
        s1, s2, s3, saved, mixed, shape = self._cache
        N, C, H, W = shape
        d = dout.reshape(N, C, H * W)
        lam = self.lambda_gate.value
        self.lambda_gate.grad += np.sum(d * mixed)
        ds1, ds2, ds3 = self._kernels.spatial_attention_backward(lam * d, s1, s2, s3, saved)
        dx = dout.copy()
        dx += self.w_s1.backward(ds1.reshape(N, -1, H, W))
        dx += self.w_s2.backward(ds2.reshape(N, -1, H, W))
        dx += self.w_s3.backward(ds3.reshape(shape))
        return dx


class ChannelAttention(Module):
    """C x C Gram-matrix attention on the raw features, gated by ``mu_gate``."""

    def __init__(self):
        self.mu_gate = Param(np.zeros(1))
        self._cache = None

    @staticmethod
    def attention_map(x):
        """Per-sample map ``A[m, n]`` of shape [N, C, C], columns sum to 1."""
        N, C = x.shape[:2]
        F = x.reshape(N, C, -1)
        return np.swapaxes(ops.softmax_rows(np.matmul(F, np.swapaxes(F, 1, 2))), 1, 2)

    def forward(self, x):
        N, C, H, W = x.shape
        F = x.reshape(N, C, H * W)
        P, _ = ops.softmax_rows_forward(np.matmul(F, np.swapaxes(F, 1, 2)))
        mixed = np.matmul(P, F)
        self._cache = (F, P, mixed, x.shape)
        return (self.mu_gate.value * mixed).reshape(x.shape) + x

    def backward(self, dout):
        F, P, mixed, shape = self._cache
        d = dout.reshape(F.shape)
        mu = self.mu_gate.value
        self.mu_gate.grad += np.sum(d * mixed)
        dmixed = mu * d
        dP = np.matmul(dmixed, np.swapaxes(F, 1, 2))
        dG = ops.softmax_rows_backward(dP, P)
        dF = d + np.matmul(np.swapaxes(P, 1, 2), dmixed) + np.matmul(dG + np.swapaxes(dG, 1, 2), F)
        return dF.reshape(shape)


def spatial_attention(x, params):
    return params.forward(x)


def channel_attention(x, params):
    return params.forward(x)
