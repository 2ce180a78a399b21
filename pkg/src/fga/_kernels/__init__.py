"""Hot-kernel backend, chosen once at import.

The compiled Cython module is preferred; the numpy fallback is used when the
extension was not built or when the environment variable ``FGA_PURE_PYTHON``
is set to a non-empty value other than ``0``.
"""
import os

from . import _pykernels

pure = _pykernels

class _Compiled:
    NAME = "cython"

    def __init__(self, core, attention):
        self.fft_rows = core.fft_rows
        self.im2col = core.im2col
        self.col2im = core.col2im
        self.stamp_gaussians = core.stamp_gaussians
        self.spatial_attention_forward = attention.spatial_attention_forward
        self.spatial_attention_backward = attention.spatial_attention_backward


def _load_compiled():
    try:
        from . import _cattention, _ckernels
    except ImportError:  # extensions not built
        return None
    return _Compiled(_ckernels, _cattention)


compiled = _load_compiled()
if compiled is None or os.environ.get("FGA_PURE_PYTHON", "0") not in ("", "0"):
    backend = _pykernels
else:
    backend = compiled

BACKEND = backend.NAME
fft_rows = backend.fft_rows
im2col = backend.im2col
col2im = backend.col2im
stamp_gaussians = backend.stamp_gaussians
spatial_attention_forward = backend.spatial_attention_forward
spatial_attention_backward = backend.spatial_attention_backward

__all__ = [
    "BACKEND", "pure", "compiled", "fft_rows", "im2col", "col2im", "stamp_gaussians",
    "spatial_attention_forward", "spatial_attention_backward",
]
