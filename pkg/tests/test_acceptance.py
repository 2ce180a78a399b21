"""Acceptance criteria 1-8.  Each test prints one PASS/FAIL line."""
import time

import numpy as np
import pytest

from fga import fft
from fga.attention import ChannelAttention, SpatialAttention
from fga.cli import main as cli_main
from fga.density import GtConfig, HeadAnnotations, generate_density_map
from fga.formats import write_tensor
from fga.gradcheck import run_suite
from fga.model import FgaConfig, FGALayer, ToyNetwork, fga_forward
from fga.nn import Conv2d
from fga.spectral import SpectralBlock, delta_image, receptive_field_probe
from fga.train import (AdamConfig, SynthSceneConfig, evaluate, matched_baseline,
                       split_datasets, train)

from oracles import dft2d


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


# 1 ----------------------------------------------------------------------

def test_criterion_1_fft_oracle(report):
    rng = np.random.default_rng(1)
    sizes = (4, 6, 8, 12, 16)
    worst = [0.0, 0.0, 0.0]
    t0 = time.perf_counter()
    for H in sizes:
        for W in sizes:
            x = rng.standard_normal((H, W))
            s = fft.rfft2d(x)
            full = s.full()
            worst[0] = max(worst[0], float(np.max(np.abs(full - dft2d(x)))))
            worst[1] = max(worst[1], float(np.max(np.abs(fft.irfft2d(s) - x))))
            e = np.sum(x ** 2)
            worst[2] = max(worst[2], float(abs(e - np.sum(np.abs(full) ** 2) / (H * W)) / e))
    dt = time.perf_counter() - t0
    ok = max(worst) < 1e-10 and dt < 10
    report(1, ok, f"25 sizes, dft {worst[0]:.1e}, roundtrip {worst[1]:.1e}, "
                  f"parseval {worst[2]:.1e}, {dt:.1f} s")


# 2 ----------------------------------------------------------------------

def test_criterion_2_gradient_suite(report):
    t0 = time.perf_counter()
    results = run_suite(seed=7)
    dt = time.perf_counter() - t0
    names = {r.name for r in results}
    needed = {"conv2d_3x3", "batchnorm2d", "relu", "softmax_rows", "matmul", "spatial_attention",
              "channel_attention", "spectral_block", "fga_layer", "toy_network_loss"}
    bad = [f"{r.name}={r.max_rel_err:.1e}" for r in results
           if r.max_rel_err >= (1e-3 if r.name == "toy_network_loss" else 1e-4)]
    worst = max(results, key=lambda r: r.max_rel_err)
    ok = not bad and needed <= names and dt < 60
    report(2, ok, f"{len(results)} checks, worst {worst.name} {worst.max_rel_err:.1e}, {dt:.1f} s"
                  + (f", failing {bad}" if bad else ""))


# 3 ----------------------------------------------------------------------

def test_criterion_3_identity_gates(report):
    rng = np.random.default_rng(3)
    same = []
    for shape in ((2, 4, 5, 6), (1, 8, 7, 7), (3, 1, 4, 4)):
        x = rng.standard_normal(shape)
        sp = SpatialAttention(shape[1], rng)
        ch = ChannelAttention()
        same.append(sp.lambda_gate.value[0] == 0 and ch.mu_gate.value[0] == 0)
        same.append(sp.forward(x).tobytes() == x.tobytes())
        same.append(ch.forward(x).tobytes() == x.tobytes())
    report(3, all(same), f"{len(same)} checks, gates start at 0 and both outputs are bit-identical")


# 4 ----------------------------------------------------------------------

def test_criterion_4_mass_conservation(report):
    rng = np.random.default_rng(4)
    cfg = GtConfig(beta=0.3, k=3)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(0, 201))
        pts = rng.uniform(16, 48, (n, 2))
        dm = generate_density_map(HeadAnnotations(pts, 64, 64), cfg)
        worst = max(worst, abs(dm.count - n))
    report(4, worst < 1e-6, f"100 maps at 64x64, max |sum - n| = {worst:.1e}")


# 5 ----------------------------------------------------------------------

def test_criterion_5_global_receptive_field(report):
    # odd planes: on power-of-two planes a delta's spectrum has too few distinct phases
    rng = np.random.default_rng(5)
    fractions, radii = [], []
    for size in (9, 15):
        at = (size // 2, size // 3)
        for channels in (1, 2):
            x = delta_image(channels, size, size, at)
            block = SpectralBlock(channels, rng)
            fractions.append(float(np.mean(receptive_field_probe(x, block.forward).max(axis=(0, 1)) > 1e-9)))
            for depth in (1, 2, 3):
                convs = [Conv2d(channels, channels, 3, rng) for _ in range(depth)]

                def stack(z):
                    for c in convs:
                        z = c.forward(z)
                    return z

                ii, jj = np.nonzero(receptive_field_probe(x, stack).max(axis=(0, 1)) > 1e-9)
                r = int(max(np.abs(ii - at[0]).max(), np.abs(jj - at[1]).max()))
                radii.append(r <= depth)
    ok = min(fractions) > 0.9 and all(radii)
    report(5, ok, f"spectral support min {min(fractions):.3f} over 9x9/15x15, "
                  f"conv stacks within radius {sum(radii)}/{len(radii)}")


# 6 ----------------------------------------------------------------------

def _run_seed(s):
    scenes = SynthSceneConfig(seed=1000 + s, height=16, width=16, min_heads=1, max_heads=12)
    tr, te = split_datasets(scenes, 200, 50)
    adam = AdamConfig(lr=1e-3)
    fga_net = ToyNetwork(1, 8, 3, 0.5, seed=s)
    base = matched_baseline(fga_net, seed=s)
    h = train(fga_net, tr, 30, adam, 16, s)
    train(base, tr, 30, adam, 16, s)
    return h[-1] / h[0], evaluate(fga_net, te)[0], evaluate(base, te)[0], \
        base.num_params() / fga_net.num_params()


@pytest.mark.slow
def test_criterion_6_training_trend(report):
    t0 = time.perf_counter()
    rows = [_run_seed(s) for s in range(5)]
    dt = time.perf_counter() - t0
    ratios, fga_mae, base_mae, pr = map(np.array, zip(*rows))
    ok = (ratios[0] < 0.5 and np.median(fga_mae) <= np.median(base_mae)
          and np.all(np.abs(pr - 1) <= 0.05) and dt < 900)
    report(6, ok, f"loss ratio seed0 {ratios[0]:.3f} (all {ratios.max():.3f} max), median test MAE "
                  f"FGA {np.median(fga_mae):.3f} vs baseline {np.median(base_mae):.3f}, "
                  f"param ratio {pr.min():.3f}-{pr.max():.3f}, {dt / 60:.1f} min")


# 7 ----------------------------------------------------------------------

def _cli_outputs(d):
    d.mkdir()
    (d / "h.csv").write_text("x,y\n10,10\n30.5,22\n50,40\n12,55\n")
    tr = ["--size", "8", "--train-scenes", "8", "--test-scenes", "3", "--max-heads", "4", "--seed", "11"]
    write_tensor(d / "img.fgat", np.linspace(0, 1, 64).reshape(8, 8))
    codes = [
        cli_main(["gen-gt", "--ann", str(d / "h.csv"), "--w", "64", "--h", "64",
                  "--out", str(d / "gt.fgad"), "--pgm", str(d / "gt.pgm"), "--csv", str(d / "gt.csv")]),
        cli_main(["fft-selftest", "--sizes", "4,6,8", "--csv", str(d / "fft.csv")]),
        cli_main(["grad-check", "--seed", "7", "--csv", str(d / "grad.csv")]),
        cli_main(["probe", "--out-dir", str(d / "probe"), "--seed", "11", "--csv", str(d / "probe.csv")]),
        cli_main(["train", *tr, "--epochs", "2", "--width", "4", "--n-fga", "1", "--lr", "1e-3",
                  "--out", str(d / "m.fgac"), "--log", str(d / "log.csv"), "--checkpoint-every", "1"]),
        cli_main(["eval", "--checkpoint", str(d / "m.fgac"), *tr, "--csv", str(d / "ev.csv")]),
        cli_main(["forward", "--image", str(d / "img.fgat"), "--checkpoint", str(d / "m.fgac"),
                  "--out", str(d / "pred.fgad"), "--pgm", str(d / "pred.pgm")]),
    ]
    files = {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
    return codes, files


def test_criterion_7_determinism(report, tmp_path):
    ca, a = _cli_outputs(tmp_path / "a")
    cb, b = _cli_outputs(tmp_path / "b")
    differ = [str(k) for k in a if a[k] != b.get(k)]
    ok = ca == cb == [0] * 7 and a.keys() == b.keys() and not differ
    report(7, ok, f"7 subcommands, {len(a)} output files byte-identical across two runs"
                  + (f", differing {differ}" if differ else ""))


# 8 ----------------------------------------------------------------------

def test_criterion_8_channel_bookkeeping(report):
    rng = np.random.default_rng(8)
    checked = rejected = 0
    bad = []
    for C in range(2, 17):
        for a10 in range(1, 10):
            alpha = a10 / 10
            cg = int(np.floor(alpha * C + 0.5 + 1e-9))
            if cg < 1 or cg > C - 1:
                with pytest.raises(ValueError):
                    FgaConfig(C, alpha)
                rejected += 1
                continue
            cfg = FgaConfig(C, alpha)
            x = rng.standard_normal((2, C, 5, 6))
            y = fga_forward(x, FGALayer(cfg, rng))
            if cfg.global_channels + cfg.local_channels != C or y.shape != x.shape:
                bad.append((C, alpha))
            checked += 1
    report(8, not bad, f"{checked} admissible (C, alpha) pairs keep Cg+Cl=C and shape, "
                       f"{rejected} empty-path splits rejected")
