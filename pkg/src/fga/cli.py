"""Command-line front end: ``fga <subcommand> [options]``.

Every run prints its resolved configuration as one JSON line first, so a
run can be replayed exactly.  Reports go to stdout as aligned tables and,
with ``--csv PATH``, to a CSV file as well.  Exit status is 0 on success,
1 when validation fails (bad input, failed check) and 2 on usage errors.
"""
import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import BACKEND, fft
from .density import AnnotationError, GtConfig, generate_density_map, ingest_annotations
from .formats import FormatError, read_pgm, read_tensor, write_density, write_pgm
from .gradcheck import run_suite
from .model import ToyNetwork
from .nn import Conv2d
from .spectral import SpectralBlock, delta_image, receptive_field_probe
from .train import (AdamConfig, SynthSceneConfig, TrainingDiverged, evaluate, load_network,
                    matched_baseline, save_network, split_datasets, train)

FFT_SIZES = (4, 6, 8, 12, 16)
FFT_TOL = 1e-10


class UsageError(Exception):
    pass


# ------------------------------------------------------------ reporting

def _emit_config(args, extra=None):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["backend"] = BACKEND
    if extra:
        cfg.update(extra)
    print("config " + json.dumps(cfg, sort_keys=True, default=str))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6e}" if (v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e5)) else f"{v:.6f}"
    return str(v)


def _report(header, rows, csv_path=None):
    """Print an aligned table; optionally write the same rows as CSV."""
    cells = [[str(h) for h in header]] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    for j, c in enumerate(cells):
        print("  ".join(s.rjust(w) for s, w in zip(c, widths)))
        if j == 0:
            print("  ".join("-" * w for w in widths))
    if csv_path:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in r])
        Path(csv_path).write_text(buf.getvalue())


# ---------------------------------------------------------- subcommands

def _gt_config(args):
    return GtConfig(beta=args.beta, k=args.k, fixed_sigma=args.fixed_sigma,
                    truncation=args.truncation, renormalize=not args.no_renormalize)


def cmd_gen_gt(args):
    gt = _gt_config(args)
    _emit_config(args)
    ann = ingest_annotations(args.ann, args.format, args.w, args.h)
    dm = generate_density_map(ann, gt)
    write_density(args.out, dm.grid)
    if args.pgm:
        write_pgm(args.pgm, dm.grid)
    _report(["heads", "height", "width", "count"],
            [[len(ann), ann.image_h, ann.image_w, dm.count]], args.csv)
    return 0


def _load_image(path):
    path = str(path)
    img = read_pgm(path) if path.lower().endswith(".pgm") else read_tensor(path)
    if img.ndim == 2:
        img = img[None, None]
    elif img.ndim == 3:
        img = img[None]
    if img.ndim != 4 or img.shape[0] != 1:
        raise ValueError(f"{path}: expected one image [H, W], [C, H, W] or [1, C, H, W], got {img.shape}")
    return img


def cmd_forward(args):
    _emit_config(args)
    net = load_network(args.checkpoint)
    img = _load_image(args.image)
    if img.shape[1] != net.arch["in_channels"]:
        raise ValueError(f"image has {img.shape[1]} channels, network expects {net.arch['in_channels']}")
    pred = net.predict(img)[0]
    write_density(args.out, pred)
    if args.pgm:
        write_pgm(args.pgm, pred)
    _report(["height", "width", "count"], [[pred.shape[0], pred.shape[1], float(pred.sum())]], args.csv)
    return 0


def cmd_grad_check(args):
    _emit_config(args)
    results = run_suite(args.seed)
    rows = [[r.name, r.max_rel_err, r.tol, "ok" if r.passed else "FAIL"] for r in results]
    _report(["op", "max_rel_err", "tol", "status"], rows, args.csv)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"gradient check failed for: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def fft_selftest(sizes=FFT_SIZES, seed=0):
    """Residuals of rfft2d against the direct DFT for every (H, W) pair in ``sizes``."""
    rng = np.random.default_rng(seed)
    rows = []
    for H in sizes:
        for W in sizes:
            x = rng.standard_normal((2, 2, H, W))
            full = fft.rfft2d(x).full()
            oracle = fft.direct_dft2(x)
            dft_err = float(np.max(np.abs(full - oracle)))
            trip = float(np.max(np.abs(fft.irfft2d(fft.rfft2d(x)) - x)))
            energy = np.sum(x ** 2)
            parseval = float(abs(energy - np.sum(np.abs(full) ** 2) / (H * W)) / energy)
            rows.append([H, W, dft_err, trip, parseval])
    return rows


def cmd_fft_selftest(args):
    _emit_config(args)
    rows = fft_selftest(args.sizes, args.seed)
    for r in rows:
        r.append("ok" if max(r[2:5]) < FFT_TOL else "FAIL")
    _report(["H", "W", "dft_max_abs", "roundtrip_max_abs", "parseval_rel", "status"], rows, args.csv)
    if any(r[-1] != "ok" for r in rows):
        print(f"fft self-test residual above {FFT_TOL}", file=sys.stderr)
        return 1
    return 0


def _scene_config(args):
    return SynthSceneConfig(seed=args.data_seed, height=args.size, width=args.size,
                            min_heads=args.min_heads, max_heads=args.max_heads, noise=args.noise)


def cmd_train(args):
    adam = AdamConfig(lr=args.lr, beta1=args.beta1, beta2=args.beta2, eps=args.eps,
                      weight_decay=args.weight_decay)
    gt = _gt_config(args)
    scenes = _scene_config(args)
    if args.epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {args.epochs}")
    net = ToyNetwork(1, args.width, args.n_fga, args.alpha_in, seed=args.seed, reduction=args.reduction)
    if args.baseline:
        net = matched_baseline(net, seed=args.seed)
    _emit_config(args, {"resolved_width": net.arch["width"], "resolved_n_fga": net.arch["n_fga"],
                        "num_params": net.num_params()})
    train_data, test_data = split_datasets(scenes, args.train_scenes, args.test_scenes, gt)
    rows = []

    def log(epoch, loss, mae, rmse):
        rows.append([epoch, loss, mae, rmse])
        print(f"epoch {epoch:4d}  loss {loss:.6f}  mae {mae:.4f}  rmse {rmse:.4f}", flush=True)

    ckpt = None
    if args.checkpoint_every:
        stem = Path(args.out)
        ckpt = str(stem.with_name(stem.stem + "_e{epoch}" + stem.suffix))
    train(net, train_data, args.epochs, adam, args.batch_size, args.seed,
          eval_data=test_data, log=log, checkpoint=ckpt, checkpoint_every=args.checkpoint_every)
    save_network(net, args.out)
    print()
    _report(["epoch", "loss", "mae", "rmse"], rows, args.log)
    print("rmse is the root-mean-square count error (often labelled MSE in crowd-counting tables)")
    return 0


def cmd_eval(args):
    gt = _gt_config(args)
    scenes = _scene_config(args)
    _emit_config(args)
    net = load_network(args.checkpoint)
    _, test_data = split_datasets(scenes, args.train_scenes, args.test_scenes, gt)
    if test_data is None:
        raise ValueError("--test-scenes must be >= 1")
    mae, rmse = evaluate(net, test_data)
    _report(["images", "mae", "rmse"], [[len(test_data), mae, rmse]], args.csv)
    print("rmse is the root-mean-square count error (often labelled MSE in crowd-counting tables)")
    return 0


def cmd_probe(args):
    _emit_config(args)
    rng = np.random.default_rng(args.seed)
    at = args.at if args.at is not None else (args.size // 2, args.size // 3)
    if not (0 <= at[0] < args.size and 0 <= at[1] < args.size):
        raise ValueError(f"probe position {at} outside a {args.size}x{args.size} plane")
    block = SpectralBlock(args.channels, rng)
    convs = [Conv2d(args.channels, args.channels, 3, rng) for _ in range(args.depth)]

    def conv_stack(x):
        for c in convs:
            x = c.forward(x)
        return x

    x = delta_image(args.channels, args.size, args.size, at)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, layer in (("spectral", block.forward), ("conv3x3", conv_stack)):
        infl = receptive_field_probe(x, layer).max(axis=(0, 1))
        write_pgm(out_dir / f"{name}.pgm", infl)
        ii, jj = np.nonzero(infl > args.threshold)
        radius = int(max(np.abs(ii - at[0]).max(), np.abs(jj - at[1]).max())) if ii.size else 0
        rows.append([name, float(np.mean(infl > args.threshold)), radius])
    _report(["layer", "fraction_perturbed", "max_chebyshev_radius"], rows, args.csv)
    return 0


# --------------------------------------------------------------- parsing

def _resolve_seed(value):
    if value is not None:
        return value
    env = os.environ.get("FGA_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"FGA_SEED must be an integer, got {env!r}") from None


def _pair(text):
    try:
        a, b = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'i,j', got {text!r}") from None
    return a, b


def _sizes(text):
    try:
        vals = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated sizes, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return vals


def _add_gt(p):
    d = GtConfig()
    p.add_argument("--beta", type=float, default=d.beta, help="sigma = beta * mean kNN distance")
    p.add_argument("--k", type=int, default=d.k, help="neighbours in the kNN mean")
    p.add_argument("--fixed-sigma", type=float, default=d.fixed_sigma,
                   help="sigma for heads without neighbours")
    p.add_argument("--truncation", type=float, default=d.truncation, help="stamp radius in sigmas")
    p.add_argument("--no-renormalize", action="store_true", help="keep truncated stamp mass as is")


def _add_scenes(p):
    d = SynthSceneConfig()
    p.add_argument("--data-seed", type=int, default=None, help="scene seed (default: --seed)")
    p.add_argument("--train-scenes", type=int, default=200)
    p.add_argument("--test-scenes", type=int, default=50)
    p.add_argument("--size", type=int, default=d.height, help="square scene side in pixels")
    p.add_argument("--min-heads", type=int, default=d.min_heads)
    p.add_argument("--max-heads", type=int, default=d.max_heads)
    p.add_argument("--noise", type=float, default=d.noise)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (fallback: $FGA_SEED, then 0)")
    common.add_argument("--csv", default=None, help="also write the report table to this CSV file")

    parser = argparse.ArgumentParser(prog="fga", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen-gt", parents=[common], help="annotations -> FGAD density map")
    p.add_argument("--ann", required=True, help="CSV (header x,y) or JSON annotation file")
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.add_argument("--w", type=int, default=None, help="image width (required for CSV)")
    p.add_argument("--h", type=int, default=None, help="image height (required for CSV)")
    p.add_argument("--out", required=True, help="output .fgad")
    p.add_argument("--pgm", default=None, help="optional PGM visualisation")
    _add_gt(p)
    p.set_defaults(func=cmd_gen_gt)

    p = sub.add_parser("forward", parents=[common], help="image + checkpoint -> predicted density")
    p.add_argument("--image", required=True, help=".fgat tensor or .pgm image")
    p.add_argument("--checkpoint", required=True, help=".fgac network checkpoint")
    p.add_argument("--out", required=True, help="output .fgad")
    p.add_argument("--pgm", default=None)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient suite")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("fft-selftest", parents=[common], help="FFT residuals against the direct DFT")
    p.add_argument("--sizes", type=_sizes, default=FFT_SIZES, help="comma-separated H/W values")
    p.set_defaults(func=cmd_fft_selftest)

    a = AdamConfig()
    p = sub.add_parser("train", parents=[common], help="train the toy network on synthetic scenes")
    _add_scenes(p)
    _add_gt(p)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=a.lr)
    p.add_argument("--beta1", type=float, default=a.beta1)
    p.add_argument("--beta2", type=float, default=a.beta2)
    p.add_argument("--eps", type=float, default=a.eps)
    p.add_argument("--weight-decay", type=float, default=a.weight_decay)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--n-fga", type=int, default=3)
    p.add_argument("--alpha-in", type=float, default=0.5)
    p.add_argument("--reduction", type=int, default=8)
    p.add_argument("--baseline", action="store_true",
                   help="train the parameter-matched conv-only network instead")
    p.add_argument("--out", required=True, help="final checkpoint .fgac")
    p.add_argument("--log", default=None, help="per-epoch CSV log (epoch,loss,mae,rmse)")
    p.add_argument("--checkpoint-every", type=int, default=0,
                   help="also save <out>_e<epoch> every k epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="MAE/RMSE of a checkpoint on the test scenes")
    p.add_argument("--checkpoint", required=True)
    _add_scenes(p)
    _add_gt(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", parents=[common], help="delta-input influence maps as PGM")
    p.add_argument("--size", type=int, default=9)
    p.add_argument("--channels", type=int, default=2)
    p.add_argument("--depth", type=int, default=1, help="3x3 convs in the comparison stack")
    p.add_argument("--at", type=_pair, default=None, help="delta position 'row,col'")
    p.add_argument("--threshold", type=float, default=1e-9)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.seed = _resolve_seed(args.seed)
        if hasattr(args, "data_seed") and args.data_seed is None:
            args.data_seed = args.seed
        return args.func(args)
    except UsageError as e:
        print(f"fga: usage error: {e}", file=sys.stderr)
        return 2
    except (AnnotationError, FormatError, TrainingDiverged, ValueError, OSError) as e:
        print(f"fga {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
