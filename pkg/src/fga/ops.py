"""Differentiable primitives on float64 numpy arrays.

Tensors are plain ``np.ndarray`` of dtype float64 in [N, C, H, W] layout.
Every op comes as a ``*_forward`` returning ``(out, cache)`` and a matching
``*_backward(dout, cache)`` returning the vector-Jacobian products; the short
names (``conv2d``, ``relu``, ...) are forward-only conveniences.
"""
import numpy as np

from . import _kernels

BN_EPS = 1e-5


def as_tensor(x):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        raise ValueError("tensors need rank >= 1")
    return a


# ---------------------------------------------------------------- conv2d

def _check_conv(x, w, b, padding):
    if x.ndim != 4:
        raise ValueError(f"conv2d input must be [N,C,H,W], got shape {x.shape}")
    if w.ndim != 4:
        raise ValueError(f"conv2d weight must be [Cout,Cin,k,k], got shape {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ValueError(
            f"conv2d channel mismatch: input shape {x.shape} has Cin={x.shape[1]}, "
            f"weight shape {w.shape} expects Cin={w.shape[1]}"
        )
    k = w.shape[2]
    if w.shape[3] != k or k not in (1, 3):
        raise ValueError(f"conv2d supports square 1x1 or 3x3 kernels, got weight shape {w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise ValueError(f"conv2d bias shape {b.shape} does not match weight shape {w.shape}")
    if padding is not None and padding != k // 2:
        raise ValueError(f"conv2d padding must be {k // 2} for a {k}x{k} kernel, got {padding}")
    return k


def conv2d_forward(x, w, b=None, padding=None):
    """Stride-1 'same' cross-correlation with zero padding."""
    x = as_tensor(x)
    w = as_tensor(w)
    k = _check_conv(x, w, b, padding)
    N, C, H, W = x.shape
    O = w.shape[0]
    wmat = w.reshape(O, C * k * k)
    if k == 1:
        cols = x.reshape(N, C, H * W)
    else:
        xpad = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        cols = _kernels.im2col(xpad, k, H, W)
    out = np.matmul(wmat, cols)
    if b is not None:
        out = out + b[None, :, None]
    return out.reshape(N, O, H, W), (x.shape, w, cols, b is not None)


def conv2d_backward(dout, cache):
    """Return ``(dx, dw, db)``; ``db`` is None for a bias-free conv."""
    xshape, w, cols, has_bias = cache
    N, C, H, W = xshape
    O, _, k, _ = w.shape
    d = dout.reshape(N, O, H * W)
    dw = np.einsum("nop,nqp->oq", d, cols).reshape(w.shape)
    db = d.sum(axis=(0, 2)) if has_bias else None
    dcols = np.matmul(w.reshape(O, C * k * k).T, d)
    if k == 1:
        dx = dcols.reshape(xshape)
    else:
        dx = _kernels.col2im(dcols, C, H, W, k)[:, :, 1:H + 1, 1:W + 1]
        dx = np.ascontiguousarray(dx)
    return dx, dw, db


def conv2d(x, w, b=None, padding=None):
    return conv2d_forward(x, w, b, padding)[0]


# ------------------------------------------------------------- batchnorm

def batchnorm2d_forward(x, gamma, beta, eps=BN_EPS):
    """Training-mode batch norm: per-channel statistics over N, H, W.

    Variance is the biased (divide-by-count) estimate.
    """
    x = as_tensor(x)
    if x.ndim != 4:
        raise ValueError(f"batchnorm2d input must be [N,C,H,W], got shape {x.shape}")
    if eps <= 0:
        raise ValueError("batchnorm2d eps must be positive")
    N, C, H, W = x.shape
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ValueError(f"batchnorm2d affine shapes {gamma.shape}/{beta.shape} do not match C={C}")
    count = N * H * W
    if count < 2:
        raise ValueError(f"batchnorm2d needs N*H*W >= 2 per channel, got {count} for shape {x.shape}")
    mean = x.mean(axis=(0, 2, 3))
    xc = x - mean[None, :, None, None]
    var = (xc * xc).mean(axis=(0, 2, 3))
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, inv_std, gamma, mean, var)


def batchnorm2d_backward(dout, cache):
    """Return ``(dx, dgamma, dbeta)``."""
    xhat, inv_std, gamma, _, _ = cache
    dbeta = dout.sum(axis=(0, 2, 3))
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    N, C, H, W = dout.shape
    m = N * H * W
    dxhat = dout * gamma[None, :, None, None]
    dx = (inv_std[None, :, None, None] / m) * (
        m * dxhat
        - dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        - xhat * (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
    )
    return dx, dgamma, dbeta


def batchnorm2d(x, gamma, beta, eps=BN_EPS):
    return batchnorm2d_forward(x, gamma, beta, eps)[0]


def batchnorm2d_inference(x, gamma, beta, mean, var, eps=BN_EPS):
    """Batch norm with frozen statistics; an affine map per channel."""
    scale = gamma / np.sqrt(var + eps)
    shift = beta - mean * scale
    return x * scale[None, :, None, None] + shift[None, :, None, None], scale


# ------------------------------------------------------------------ relu

def relu_forward(x):
    x = as_tensor(x)
    mask = x > 0
    # NaN fails the mask test but must still reach the loss
    return np.where(mask | np.isnan(x), x, 0.0), mask


def relu_backward(dout, mask):
    # subgradient at exactly 0 is 0
    return np.where(mask, dout, 0.0)


def relu(x):
    return relu_forward(x)[0]


# --------------------------------------------------------------- softmax

def softmax_rows_forward(x):
    """Softmax over the last axis with per-row max subtraction."""
    x = as_tensor(x)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    return y, y


def softmax_rows_backward(dout, y):
    return y * (dout - (dout * y).sum(axis=-1, keepdims=True))


def softmax_rows(x):
    return softmax_rows_forward(x)[0]


# ---------------------------------------------------------------- matmul

def matmul_forward(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    return np.matmul(a, b), (a, b)


def matmul_backward(dout, cache):
    a, b = cache
    return np.matmul(dout, np.swapaxes(b, -1, -2)), np.matmul(np.swapaxes(a, -1, -2), dout)


def matmul(a, b):
    return matmul_forward(a, b)[0]


def transpose(t, axes=None):
    return np.transpose(as_tensor(t), axes)


def reshape(t, shape):
    t = as_tensor(t)
    if int(np.prod(shape)) != t.size:
        raise ValueError(f"cannot reshape {t.shape} ({t.size} elements) to {tuple(shape)}")
    return t.reshape(shape)
