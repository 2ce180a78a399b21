"""Loss, count metrics, Adam, synthetic crowd scenes and the training loops."""
import math
from dataclasses import dataclass, field

import numpy as np

from .density import GtConfig, HeadAnnotations, generate_density_map
from .formats import write_checkpoint


# ------------------------------------------------------------------ loss

def euclidean_loss_forward(pred, gt):
    """``L = 1/(2N) * sum_i ||pred_i - gt_i||^2`` and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} != ground truth shape {gt.shape}")
    n = pred.shape[0]
    diff = pred - gt
    return float(np.sum(diff * diff) / (2 * n)), diff / n


def euclidean_loss(pred, gt):
    """Loss over two equal-length lists of maps (shapes may differ between pairs)."""
    if len(pred) != len(gt) or not len(pred):
        raise ValueError(f"need equal, non-empty lists, got {len(pred)} and {len(gt)}")
    total = 0.0
    for i, (p, g) in enumerate(zip(pred, gt)):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape:
            raise ValueError(f"pair {i}: prediction shape {p.shape} != ground truth shape {g.shape}")
        total += np.sum((p - g) ** 2)
    return float(total / (2 * len(pred)))


# --------------------------------------------------------------- metrics

def mae_rmse(pred_counts, gt_counts):
    """Mean absolute and root-mean-square count errors.

    The root form is what crowd-counting tables conventionally print under
    the label "MSE"; reports here name it RMSE.
    """
    p = np.asarray(pred_counts, dtype=np.float64)
    g = np.asarray(gt_counts, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 1 or p.size == 0:
        raise ValueError(f"need equal-length non-empty count lists, got {p.shape} and {g.shape}")
    err = p - g
    return float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err * err)))


# ------------------------------------------------------------------ adam

@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-5
    beta1: float = 0.93
    beta2: float = 0.99
    eps: float = 1e-8
    weight_decay: float = 1e-3

    def __post_init__(self):
        if not (self.lr > 0 and 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1
                and self.weight_decay >= 0 and self.eps > 0):
            raise ValueError(f"invalid Adam config {self}")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, state, cfg):
    """One Adam update with decoupled weight decay, in place.

    ``params`` maps names to :class:`fga.nn.Param`.  Decay shrinks each
    value by ``1 - lr * weight_decay`` before the bias-corrected Adam step.
    """
    for name, p in params.items():
        if not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient in parameter {name!r}; step aborted")
    state.t += 1
    t = state.t
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    for name, p in params.items():
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        v = state.v[name]
        m *= cfg.beta1
        m += (1 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1 - cfg.beta2) * g * g
        if cfg.weight_decay:
            p.value *= 1.0 - cfg.lr * cfg.weight_decay
        p.value -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return params, state


# ------------------------------------------------------- synthetic scenes

@dataclass(frozen=True)
class SynthSceneConfig:
    seed: int = 0
    height: int = 32
    width: int = 32
    min_heads: int = 2
    max_heads: int = 20
    amp_range: tuple = (0.6, 1.0)
    radius_range: tuple = (1.0, 1.8)
    noise: float = 0.05
    margin: float = 1.0

    def __post_init__(self):
        if self.min_heads < 0 or self.max_heads < self.min_heads:
            raise ValueError(f"bad head-count range [{self.min_heads}, {self.max_heads}]")
        if self.height < 1 or self.width < 1:
            raise ValueError("scene size must be positive")


def synth_dataset(cfg, n):
    """``n`` scenes of noise plus one radial bright blob per head.

    Returns a list of ``(image [H, W], HeadAnnotations)``; fully determined
    by ``cfg.seed``.
    """
    if n < 1:
        raise ValueError(f"need at least one scene, got {n}")
    rng = np.random.default_rng(cfg.seed)
    H, W = cfg.height, cfg.width
    yy, xx = np.mgrid[0:H, 0:W] + 0.5
    out = []
    for _ in range(n):
        count = int(rng.integers(cfg.min_heads, cfg.max_heads + 1))
        xs = rng.uniform(cfg.margin, W - cfg.margin, count)
        ys = rng.uniform(cfg.margin, H - cfg.margin, count)
        amps = rng.uniform(*cfg.amp_range, count)
        radii = rng.uniform(*cfg.radius_range, count)
        img = cfg.noise * rng.standard_normal((H, W))
        for x, y, a, r in zip(xs, ys, amps, radii):
            img += a * np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * r * r))
        out.append((img, HeadAnnotations(np.stack([xs, ys], axis=1), W, H)))
    return out


@dataclass
class Dataset:
    images: np.ndarray  # [N, 1, H, W]
    density: np.ndarray  # [N, H, W]
    counts: np.ndarray  # [N] ground-truth head counts

    def __len__(self):
        return len(self.images)


def build_dataset(scenes, gt_cfg=GtConfig()):
    images = np.stack([img for img, _ in scenes])[:, None]
    density = np.stack([generate_density_map(ann, gt_cfg).grid for _, ann in scenes])
    counts = np.array([len(ann) for _, ann in scenes], dtype=np.float64)
    return Dataset(images, density, counts)


# ------------------------------------------------------------- loops

class TrainingDiverged(FloatingPointError):
    pass


def predict_counts(network, images, batch_size=16):
    counts = []
    for i in range(0, len(images), batch_size):
        counts.append(network.predict(images[i:i + batch_size]).sum(axis=(1, 2)))
    return np.concatenate(counts)


def evaluate(network, data, batch_size=16):
    """(MAE, RMSE) of predicted counts (sums of predicted maps)."""
    return mae_rmse(predict_counts(network, data.images, batch_size), data.counts)


def train(network, data, epochs, adam_cfg=AdamConfig(), batch_size=16, seed=0,
          eval_data=None, log=None, checkpoint=None, checkpoint_every=0):
    """Minibatch training with a seeded per-epoch shuffle.

    Returns the per-epoch mean training loss.  ``log`` is called with
    ``(epoch, loss, mae, rmse)`` after every epoch, where the metrics come
    from ``eval_data`` (or the training set when it is None).
    """
    if not len(data):
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    params = network.named_params()
    state = AdamState()
    history = []
    network.train()
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = np.sort(order[start:start + batch_size])
            network.zero_grad()
            pred = network.forward(data.images[idx])[:, 0]
            loss, dpred = euclidean_loss_forward(pred, data.density[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} in epoch {epoch}")
            network.backward(dpred[:, None])
            try:
                adam_step(params, state, adam_cfg)
            except FloatingPointError as e:
                raise TrainingDiverged(f"epoch {epoch}: {e}") from None
            total += loss * len(idx)
        history.append(total / len(data))
        if log is not None:
            mae, rmse = evaluate(network, eval_data if eval_data is not None else data)
            log(epoch, history[-1], mae, rmse)
        if checkpoint and checkpoint_every and epoch % checkpoint_every == 0:
            save_network(network, checkpoint.format(epoch=epoch))
    return history


def save_network(network, path):
    a = network.arch
    entries = {"__arch__": np.array([a["in_channels"], a["width"], a["n_fga"],
                                     a["alpha_in"], a["reduction"]], dtype=np.float64)}
    entries.update({k: p.value for k, p in network.named_params().items()})
    entries.update(network.named_buffers())
    write_checkpoint(path, entries)


def load_network(path):
    from .formats import read_checkpoint
    from .model import ToyNetwork

    entries = read_checkpoint(path)
    try:
        in_ch, width, n_fga, alpha, red = entries.pop("__arch__")
    except KeyError:
        raise ValueError(f"{path}: checkpoint has no __arch__ entry") from None
    net = ToyNetwork(int(in_ch), int(width), int(n_fga), float(alpha), seed=0, reduction=int(red))
    params = net.named_params()
    expected = set(params) | set(net.named_buffers())
    if set(entries) != expected:
        missing = sorted(expected - set(entries))
        extra = sorted(set(entries) - expected)
        raise ValueError(f"{path}: checkpoint mismatch, missing {missing[:5]}, unexpected {extra[:5]}")
    for name, p in params.items():
        if entries[name].shape != p.value.shape:
            raise ValueError(f"{path}: {name} has shape {entries[name].shape}, expected {p.value.shape}")
        p.value = entries[name].copy()
        p.zero_grad()
    for name in net.named_buffers():
        mod = net
        *path_parts, attr = name.split(".")
        for part in path_parts:
            mod = mod[int(part)] if isinstance(mod, list) else getattr(mod, part)
        setattr(mod, attr, entries[name].copy())
    return net


def split_datasets(scene_cfg, n_train, n_test, gt_cfg=GtConfig()):
    """One seeded scene stream: the first ``n_train`` scenes train, the rest test."""
    scenes = synth_dataset(scene_cfg, n_train + n_test)
    test = build_dataset(scenes[n_train:], gt_cfg) if n_test else None
    return build_dataset(scenes[:n_train], gt_cfg), test


def matched_baseline(network, seed=0, max_width=64):
    """Conv-only network (no FGA layers) whose width best matches ``network``'s parameter count."""
    from .model import ToyNetwork

    target = network.num_params()
    cin = network.arch["in_channels"]
    width = min(range(2, max_width + 1),
                key=lambda w: abs(ToyNetwork(cin, w, 0, seed=0).num_params() - target))
    return ToyNetwork(cin, width, 0, network.arch["alpha_in"], seed=seed)
