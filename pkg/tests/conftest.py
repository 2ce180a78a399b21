import sys
from pathlib import Path

import numpy as np
import pytest

import fga._kernels as K

sys.path.insert(0, str(Path(__file__).parent))

KERNEL_NAMES = ["fft_rows", "im2col", "col2im", "stamp_gaussians",
                "spatial_attention_forward", "spatial_attention_backward"]

BACKENDS = [K.pure] + ([K.compiled] if K.compiled is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda b: b.NAME)
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    for name in KERNEL_NAMES:
        monkeypatch.setattr(K, name, getattr(request.param, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
