"""The dual-path FGA layer and the small counting network built from it."""
import math
from dataclasses import dataclass

import numpy as np

from .attention import ChannelAttention, SpatialAttention
from .nn import BatchNorm2d, Conv2d, Module, ReLU
from .spectral import SpectralBlock


@dataclass(frozen=True)
class FgaConfig:
    """Channel split of one FGA layer.

    The global path gets ``round_half_up(alpha_in * channels)`` channels,
    taken from the front of the channel axis; both paths must be non-empty.
    """

    channels: int
    alpha_in: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha_in <= 1.0:
            raise ValueError(f"alpha_in must lie in [0, 1], got {self.alpha_in}")
        cg = self.global_channels
        if cg < 1 or cg > self.channels - 1:
            raise ValueError(
                f"alpha_in={self.alpha_in} with {self.channels} channels gives "
                f"{cg} global / {self.channels - cg} local channels; both paths need at least one"
            )

    @property
    def global_channels(self):
        # the epsilon keeps products like 0.3 * 5 = 1.4999... on the half-up side
        return int(math.floor(self.alpha_in * self.channels + 0.5 + 1e-9))

    @property
    def local_channels(self):
        return self.channels - self.global_channels


class FGALayer(Module):
    def __init__(self, cfg, rng, reduction=8):
        self.cfg = cfg
        cg, cl = cfg.global_channels, cfg.local_channels
        self.conv_ll = Conv2d(cl, cl, 3, rng)
        self.conv_lg = Conv2d(cl, cg, 3, rng)
        self.conv_gl = Conv2d(cg, cl, 3, rng)
        self.spectral = SpectralBlock(cg, rng)
        self.bn1 = BatchNorm2d(cl)
        self.bn2 = BatchNorm2d(cg)
        self.relu1 = ReLU()
        self.relu2 = ReLU()
        self.ch_attn = ChannelAttention()
        self.sp_attn = SpatialAttention(cg, rng, reduction)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.cfg.channels:
            raise ValueError(f"FGA layer expects {self.cfg.channels} channels, got input {x.shape}")
        cg = self.cfg.global_channels
        xg, xl = x[:, :cg], x[:, cg:]
        y1 = self.conv_gl.forward(xg) + self.conv_ll.forward(xl)
        y2 = self.conv_lg.forward(xl) + self.spectral.forward(xg)
        y_l = self.ch_attn.forward(self.relu1.forward(self.bn1.forward(y1)))
        y_g = self.sp_attn.forward(self.relu2.forward(self.bn2.forward(y2)))
        return np.concatenate((y_g, y_l), axis=1)

    def backward(self, dout):
        cg = self.cfg.global_channels
        dy2 = self.bn2.backward(self.relu2.backward(self.sp_attn.backward(dout[:, :cg])))
        dy1 = self.bn1.backward(self.relu1.backward(self.ch_attn.backward(dout[:, cg:])))
        dxg = self.conv_gl.backward(dy1) + self.spectral.backward(dy2)
        dxl = self.conv_ll.backward(dy1) + self.conv_lg.backward(dy2)
        return np.concatenate((dxg, dxl), axis=1)


def fga_forward(x, layer):
    return layer.forward(x)


class ToyNetwork(Module):
    """Two conv3x3-ReLU stem layers, stacked FGA layers, 1x1 ReLU density head."""

    def __init__(self, in_channels=1, width=8, n_fga=3, alpha_in=0.5, seed=0, reduction=8):
        if width < 2:
            raise ValueError(f"width must be >= 2 so the FGA split is possible, got {width}")
        if n_fga < 0:
            raise ValueError(f"n_fga must be >= 0, got {n_fga}")
        rng = np.random.default_rng(seed)
        self.arch = dict(in_channels=in_channels, width=width, n_fga=n_fga,
                         alpha_in=alpha_in, reduction=reduction)
        self.stem1 = Conv2d(in_channels, width, 3, rng)
        self.stem_relu1 = ReLU()
        self.stem2 = Conv2d(width, width, 3, rng)
        self.stem_relu2 = ReLU()
        cfg = FgaConfig(width, alpha_in) if n_fga else None
        self.fga = [FGALayer(cfg, rng, reduction) for _ in range(n_fga)]
        self.head = Conv2d(width, 1, 1, rng)
        # start near a small uniform positive density so the output ReLU passes gradient
        self.head.weight.value *= 0.01
        self.head.bias.value[:] = 0.01
        self.head_relu = ReLU()

    def forward(self, x):
        h = self.stem_relu1.forward(self.stem1.forward(x))
        h = self.stem_relu2.forward(self.stem2.forward(h))
        for layer in self.fga:
            h = layer.forward(h)
        return self.head_relu.forward(self.head.forward(h))

    def backward(self, dout):
        d = self.head.backward(self.head_relu.backward(dout))
        for layer in reversed(self.fga):
            d = layer.backward(d)
        d = self.stem2.backward(self.stem_relu2.backward(d))
        return self.stem1.backward(self.stem_relu1.backward(d))

    def predict(self, x):
        """Density maps [N, H, W] in eval mode; the module's mode is restored."""
        was = self.training
        self.eval()
        try:
            return self.forward(x)[:, 0]
        finally:
            self.train(was)


def build_toy_network(in_channels=1, width=8, n_fga=3, alpha_in=0.5, seed=0):
    return ToyNetwork(in_channels, width, n_fga, alpha_in, seed)
