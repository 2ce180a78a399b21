"""Central finite-difference checks for every hand-written backward pass.

Relative error is norm-wise per tensor, ``||analytic - numeric|| /
max(||analytic||, ||numeric||, floor)``, where ``floor`` is 1e-3 of the
largest gradient norm in the same check (and at least 1e-5).  The floor only
bites for tensors whose exact gradient vanishes (a bias feeding batch norm,
a shift that softmax ignores); there central differences return rounding
noise proportional to the loss magnitude.

Each check builds a scalar objective ``L = sum(out * R)`` with a fixed
random ``R`` so the upstream gradient is ``R`` itself.
"""
from dataclasses import dataclass

import numpy as np

from . import fft, ops
from .attention import ChannelAttention, SpatialAttention
from .model import FgaConfig, FGALayer, ToyNetwork
from .spectral import SpectralBlock

STEP = 1e-6
OP_TOL = 1e-4
NETWORK_TOL = 1e-3


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tol: float

    @property
    def passed(self):
        return bool(self.max_rel_err < self.tol)


def rel_err(a, b, floor=1e-5):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / den)


def max_rel_err(pairs):
    """Worst per-tensor error over ``(analytic, numeric)`` pairs of one check."""
    scale = max(max(np.linalg.norm(a), np.linalg.norm(n)) for a, n in pairs)
    floor = max(1e-5, 1e-3 * scale)
    return max(rel_err(a, n, floor) for a, n in pairs)


def numerical_grad(f, x, h=STEP):
    """Central differences of scalar ``f()`` w.r.t. array ``x``, mutated in place."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


def check_module(name, module, x, rng, tol=OP_TOL):
    """Check d/dx and d/dparam of ``sum(module(x) * R)`` for every parameter."""
    module.train()
    x = np.array(x, dtype=np.float64)
    R = rng.standard_normal(module.forward(x).shape)

    def loss():
        return float(np.sum(module.forward(x) * R))

    module.zero_grad()
    module.forward(x)
    dx = module.backward(R)
    pairs = [(dx, numerical_grad(loss, x))]
    for p in module.named_params().values():
        analytic = p.grad.copy()
        pairs.append((analytic, numerical_grad(loss, p.value)))
    return CheckResult(name, max_rel_err(pairs), tol)


def _check_fn(name, fwd, bwd, inputs, rng, tol=OP_TOL):
    inputs = [np.array(a, dtype=np.float64) for a in inputs]
    out, cache = fwd(*inputs)
    R = rng.standard_normal(out.shape)
    grads = bwd(R, cache)
    if not isinstance(grads, tuple):
        grads = (grads,)

    def loss():
        return float(np.sum(fwd(*inputs)[0] * R))

    pairs = [(g, numerical_grad(loss, a)) for g, a in zip(grads, inputs) if g is not None]
    return CheckResult(name, max_rel_err(pairs), tol)


def _away_from_zero(rng, shape, margin=1e-4):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-300) * (margin + np.abs(x) + 0.01), x)


def run_suite(seed=7):
    """Run every gradient check on seeded random tensors; returns CheckResults."""
    rng = np.random.default_rng(seed)
    results = []

    x = rng.standard_normal((2, 3, 5, 5))
    for k in (1, 3):
        w = rng.standard_normal((4, 3, k, k))
        b = rng.standard_normal(4)
        results.append(_check_fn(f"conv2d_{k}x{k}", ops.conv2d_forward, ops.conv2d_backward,
                                 [x, w, b], rng))

    results.append(_check_fn(
        "batchnorm2d", ops.batchnorm2d_forward, ops.batchnorm2d_backward,
        [rng.standard_normal((2, 3, 4, 4)), 1.0 + rng.random(3), rng.standard_normal(3)], rng))

    results.append(_check_fn("relu", ops.relu_forward, ops.relu_backward,
                             [_away_from_zero(rng, (3, 4, 5))], rng))
    results.append(_check_fn("softmax_rows", ops.softmax_rows_forward, ops.softmax_rows_backward,
                             [rng.standard_normal((4, 6))], rng))
    results.append(_check_fn("matmul", ops.matmul_forward, ops.matmul_backward,
                             [rng.standard_normal((4, 5)), rng.standard_normal((5, 3))], rng))

    def rfft_fwd(a):
        s = fft.rfft2d(a)
        return np.concatenate((s.re, s.im), axis=-1), a.shape[-1]

    def rfft_bwd(d, width):
        wf = width // 2 + 1
        return fft.rfft2d_adjoint(d[..., :wf], d[..., wf:], width)

    def irfft_fwd(z):
        wf = z.shape[-1] // 2
        return fft.irfft2d(fft.ComplexSpectrum(z[..., :wf], z[..., wf:], 2 * (wf - 1))), None

    def irfft_bwd(d, _):
        return np.concatenate(fft.irfft2d_adjoint(d), axis=-1)

    for h, w in ((4, 6), (5, 7)):
        results.append(_check_fn(f"rfft2d_{h}x{w}", rfft_fwd, rfft_bwd,
                                 [rng.standard_normal((1, 2, h, w))], rng, tol=1e-6))
    results.append(_check_fn("irfft2d_4x6", irfft_fwd, irfft_bwd,
                             [rng.standard_normal((1, 2, 4, 8))], rng, tol=1e-6))

    sp = SpatialAttention(4, rng, reduction=2)
    sp.lambda_gate.value[:] = 0.7
    _randomize(sp, rng)
    results.append(check_module("spatial_attention", sp, rng.standard_normal((2, 4, 3, 3)), rng))

    ch = ChannelAttention()
    ch.mu_gate.value[:] = 0.8
    results.append(check_module("channel_attention", ch, 0.5 * rng.standard_normal((2, 3, 3, 3)), rng))

    sb = SpectralBlock(2, rng)
    _randomize(sb, rng)
    results.append(check_module("spectral_block", sb, rng.standard_normal((1, 2, 4, 4)), rng))

    layer = FGALayer(FgaConfig(4, 0.5), rng, reduction=2)
    _randomize(layer, rng)
    results.append(check_module("fga_layer", layer, rng.standard_normal((1, 4, 6, 6)), rng))

    results.append(check_network(seed))
    return results


def _randomize(module, rng, scale=0.5):
    """Move parameters off their special initial values (zero gates, unit BN)."""
    for name, p in module.named_params().items():
        if name.endswith("gamma"):
            p.value[...] = 1.0 + scale * rng.random(p.value.shape)
        else:
            p.value[...] = p.value + scale * rng.standard_normal(p.value.shape)


def check_network(seed=7, tol=NETWORK_TOL):
    """End-to-end check of the toy network's Euclidean loss w.r.t. all parameters."""
    from .train import euclidean_loss_forward

    rng = np.random.default_rng(seed + 1)
    net = ToyNetwork(1, 8, 3, 0.5, seed=seed)
    _randomize(net, rng, scale=0.2)
    x = rng.standard_normal((2, 1, 6, 6))
    gt = np.abs(rng.standard_normal((2, 6, 6)))

    def loss():
        return euclidean_loss_forward(net.forward(x)[:, 0], gt)[0]

    net.zero_grad()
    _, dpred = euclidean_loss_forward(net.forward(x)[:, 0], gt)
    net.backward(dpred[:, None])
    pairs = []
    for p in net.named_params().values():
        analytic = p.grad.copy()
        pairs.append((analytic, numerical_grad(loss, p.value)))
    return CheckResult("toy_network_loss", max_rel_err(pairs), tol)
