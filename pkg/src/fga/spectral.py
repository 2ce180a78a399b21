"""Frequency-domain unit: real FFT, 1x1 Conv-BN-ReLU on stacked re/im, inverse FFT."""
import numpy as np

from . import fft
from .nn import BatchNorm2d, Conv2d, Module, ReLU


class SpectralBlock(Module):
    """Maps [N, C, H, W] to [N, C, H, W] through a pointwise spectral update.

    Channels ``0..C-1`` of the stacked spectrum hold real parts and
    ``C..2C-1`` imaginary parts.  Each frequency bin is transformed by the
    same 1x1 convolution, so a single bin change reaches every output pixel.
    """

    def __init__(self, channels, rng):
        self.channels = channels
        self.freq_conv = Conv2d(2 * channels, 2 * channels, 1, rng)
        self.freq_bn = BatchNorm2d(2 * channels)
        self.freq_relu = ReLU()
        self._width = None

    def forward(self, x):
        N, C, H, W = x.shape
        if 2 * C != self.freq_conv.weight.value.shape[1]:
            raise ValueError(
                f"spectral block built for {self.channels} channels "
                f"(parameters carry {self.freq_conv.weight.value.shape[1]} stacked), got input {x.shape}"
            )
        s = fft.rfft2d(x)
        y = np.concatenate((s.re, s.im), axis=1)
        z = self.freq_relu.forward(self.freq_bn.forward(self.freq_conv.forward(y)))
        self._width = W
        return fft.irfft2d(fft.ComplexSpectrum(z[:, :C], z[:, C:], W))

    def backward(self, dout):
        C = self.channels
        dre, dim = fft.irfft2d_adjoint(dout)
        dz = np.concatenate((dre, dim), axis=1)
        dy = self.freq_conv.backward(self.freq_bn.backward(self.freq_relu.backward(dz)))
        return fft.rfft2d_adjoint(dy[:, :C], dy[:, C:], self._width)


def spectral_block(x, params):
    return params.forward(x)


def receptive_field_probe(x, layer):
    """Influence map ``|layer(x) - layer(0)|`` for a probe input ``x``.

    ``layer`` is any callable [N, C, H, W] -> [N, C', H, W].
    """
    x = np.asarray(x, dtype=np.float64)
    return np.abs(layer(x) - layer(np.zeros_like(x)))


def delta_image(channels, height, width, at=(0, 0)):
    x = np.zeros((1, channels, height, width))
    x[0, :, at[0], at[1]] = 1.0
    return x
