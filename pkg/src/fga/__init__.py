"""Fourier-guided attention for crowd density estimation, in plain numpy."""
from ._kernels import BACKEND

__version__ = "0.1.0"
