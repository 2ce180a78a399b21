"""Stateful layers over :mod:`fga.ops` with hand-written backward passes.

Each layer caches what its backward needs during ``forward`` and
accumulates parameter gradients into ``Param.grad`` during ``backward``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import ops


@dataclass(eq=False)
class Param:
    """A learnable tensor and its accumulated gradient."""

    value: np.ndarray
    grad: np.ndarray = field(default=None)

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        elif self.grad.shape != self.value.shape:
            raise ValueError(f"grad shape {self.grad.shape} != value shape {self.value.shape}")

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)


class Module:
    training = True

    def named_params(self, prefix=""):
        """Parameters in definition order, dotted names."""
        out = {}
        for name, v in vars(self).items():
            if isinstance(v, Param):
                out[prefix + name] = v
            elif isinstance(v, Module):
                out.update(v.named_params(f"{prefix}{name}."))
            elif isinstance(v, list) and v and isinstance(v[0], Module):
                for i, m in enumerate(v):
                    out.update(m.named_params(f"{prefix}{name}.{i}."))
        return out

    def named_buffers(self, prefix=""):
        out = {}
        for name, v in vars(self).items():
            if isinstance(v, Module):
                out.update(v.named_buffers(f"{prefix}{name}."))
            elif isinstance(v, list) and v and isinstance(v[0], Module):
                for i, m in enumerate(v):
                    out.update(m.named_buffers(f"{prefix}{name}.{i}."))
        for name in getattr(self, "_buffers", ()):
            out[prefix + name] = getattr(self, name)
        return out

    def children(self):
        for v in vars(self).values():
            if isinstance(v, Module):
                yield v
            elif isinstance(v, list) and v and isinstance(v[0], Module):
                yield from v

    def train(self, mode=True):
        self.training = mode
        for c in self.children():
            c.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.named_params().values():
            p.zero_grad()

    def num_params(self):
        return sum(p.value.size for p in self.named_params().values())

    def __call__(self, x):
        return self.forward(x)


def he_normal(rng, shape):
    fan_in = int(np.prod(shape[1:]))
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


class Conv2d(Module):
    def __init__(self, cin, cout, k, rng, bias=True):
        self.weight = Param(he_normal(rng, (cout, cin, k, k)))
        self.bias = Param(np.zeros(cout)) if bias else None
        self._cache = None

    def forward(self, x):
        b = self.bias.value if self.bias is not None else None
        out, self._cache = ops.conv2d_forward(x, self.weight.value, b)
        return out

    def backward(self, dout):
        dx, dw, db = ops.conv2d_backward(dout, self._cache)
        self.weight.grad += dw
        if self.bias is not None:
            self.bias.grad += db
        return dx


class BatchNorm2d(Module):
    """Batch statistics while training, running averages in eval mode."""

    _buffers = ("running_mean", "running_var")

    def __init__(self, channels, eps=ops.BN_EPS, momentum=0.1):
        self.gamma = Param(np.ones(channels))
        self.beta = Param(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.eps = eps
        self.momentum = momentum
        self._cache = None

    def forward(self, x):
        if self.training:
            out, cache = ops.batchnorm2d_forward(x, self.gamma.value, self.beta.value, self.eps)
            _, _, _, mean, var = cache
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mean
            self.running_var = (1 - m) * self.running_var + m * var
            self._cache = ("train", cache)
        else:
            out, scale = ops.batchnorm2d_inference(
                x, self.gamma.value, self.beta.value, self.running_mean, self.running_var, self.eps
            )
            xhat = (x - self.running_mean[None, :, None, None]) / np.sqrt(
                self.running_var + self.eps
            )[None, :, None, None]
            self._cache = ("eval", (scale, xhat))
        return out

    def backward(self, dout):
        mode, cache = self._cache
        if mode == "train":
            dx, dg, db = ops.batchnorm2d_backward(dout, cache)
        else:
            scale, xhat = cache
            dx = dout * scale[None, :, None, None]
            dg = (dout * xhat).sum(axis=(0, 2, 3))
            db = dout.sum(axis=(0, 2, 3))
        self.gamma.grad += dg
        self.beta.grad += db
        return dx


class ReLU(Module):
    def __init__(self):
        self._mask = None

    def forward(self, x):
        out, self._mask = ops.relu_forward(x)
        return out

    def backward(self, dout):
        return ops.relu_backward(dout, self._mask)
