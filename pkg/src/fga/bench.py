"""Timing of the pure-numpy and compiled kernel backends.

    python -m fga.bench [--repeat 5] [--csv bench.csv]

Each kernel runs on the same inputs under both backends; the table lists
the best-of-``repeat`` wall time, the speedup and the largest absolute
difference between the two results.  The last rows time one forward and
backward pass of the toy network, which is what training pays for.
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from . import _kernels
from ._kernels import compiled, pure

_KERNEL_NAMES = ("fft_rows", "im2col", "col2im", "stamp_gaussians",
                 "spatial_attention_forward", "spatial_attention_backward")


def _train_step(rng, size):
    from .model import ToyNetwork

    x = rng.random((16, 1, size, size))

    def make(k):
        net = ToyNetwork(1, 8, 3, 0.5, seed=0)

        def step():
            # route the whole network through backend k for this call only
            old = {n: getattr(_kernels, n) for n in _KERNEL_NAMES}
            try:
                for n in _KERNEL_NAMES:
                    setattr(_kernels, n, getattr(k, n))
                out = net.forward(x)
                net.zero_grad()
                net.backward(np.ones_like(out))
                return out
            finally:
                for n, f in old.items():
                    setattr(_kernels, n, f)
        return step
    return make


def _cases(rng):
    xpad = rng.standard_normal((16, 8, 34, 34))
    cols = rng.standard_normal((16, 8 * 9, 32 * 32))
    pts = rng.uniform(8, 56, (200, 2))
    sig = rng.uniform(0.5, 3.0, 200)
    s1 = rng.standard_normal((4, 1, 32 * 32))
    s2 = rng.standard_normal((4, 1, 32 * 32))
    s3 = rng.standard_normal((4, 4, 32 * 32))
    dm = rng.standard_normal((4, 4, 32 * 32))

    def attn_bwd(k):
        _, saved = k.spatial_attention_forward(s1, s2, s3)
        return lambda: k.spatial_attention_backward(dm, s1, s2, s3, saved)

    re32, im32 = rng.standard_normal((2, 512, 32))
    re24, im24 = rng.standard_normal((2, 512, 24))
    return [
        ("fft_rows 512x32 (radix-2)", lambda k: lambda: k.fft_rows(re32, im32, False)),
        ("fft_rows 512x24 (direct)", lambda k: lambda: k.fft_rows(re24, im24, False)),
        ("im2col 16x8x32x32 k3", lambda k: lambda: k.im2col(xpad, 3, 32, 32)),
        ("col2im 16x8x32x32 k3", lambda k: lambda: k.col2im(cols, 8, 32, 32, 3)),
        ("stamp_gaussians 200 on 64x64",
         lambda k: lambda: k.stamp_gaussians(np.zeros((64, 64)), pts[:, 0], pts[:, 1], sig, 4.0, True)),
        ("spatial_attention fwd 4x1024", lambda k: lambda: k.spatial_attention_forward(s1, s2, s3)),
        ("spatial_attention bwd 4x1024", attn_bwd),
        ("train step 16x1x16x16", _train_step(rng, 16)),
        ("train step 16x1x32x32", _train_step(rng, 32)),
    ]


def _maxdiff(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    # the attention forward returns backend-specific saved state; compare outputs only
    return max(float(np.max(np.abs(np.asarray(x) - np.asarray(y))))
               for x, y in zip(a, b) if np.shape(x) == np.shape(y))


def run(repeat=5, seed=0):
    if compiled is None:
        raise RuntimeError("compiled kernels are not built; install the package with a C compiler")
    rng = np.random.default_rng(seed)
    rows = []
    for name, make in _cases(rng):
        fp, fc = make(pure), make(compiled)
        diff = _maxdiff(fp(), fc())
        tp = min(timeit.repeat(fp, number=1, repeat=repeat))
        tc = min(timeit.repeat(fc, number=1, repeat=repeat))
        rows.append((name, tp, tc, tp / tc, diff))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(prog="python -m fga.bench", description="compare kernel backends")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args(argv)
    try:
        rows = run(args.repeat, args.seed)
    except RuntimeError as e:
        print(f"bench: {e}", file=sys.stderr)
        return 1
    print(f"{'kernel':32s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s} {'max|diff|':>10s}")
    for name, tp, tc, sp, diff in rows:
        print(f"{name:32s} {tp * 1e3:10.3f} {tc * 1e3:10.3f} {sp:8.1f} {diff:10.2e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kernel", "python_s", "cython_s", "speedup", "max_abs_diff"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
