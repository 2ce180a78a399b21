import numpy as np
import pytest

import fga._kernels as K
from fga.gradcheck import NETWORK_TOL, OP_TOL, CheckResult, max_rel_err, rel_err, run_suite

from conftest import BACKENDS, KERNEL_NAMES

EXPECTED = [
    "conv2d_1x1", "conv2d_3x3", "batchnorm2d", "relu", "softmax_rows", "matmul",
    "rfft2d_4x6", "rfft2d_5x7", "irfft2d_4x6", "spatial_attention", "channel_attention",
    "spectral_block", "fga_layer", "toy_network_loss",
]


@pytest.fixture(scope="module", params=BACKENDS, ids=lambda b: b.NAME)
def suite(request):
    with pytest.MonkeyPatch.context() as mp:
        for name in KERNEL_NAMES:
            mp.setattr(K, name, getattr(request.param, name))
        return {r.name: r for r in run_suite(seed=7)}


def test_suite_covers_every_op(suite):
    assert list(suite) == EXPECTED


@pytest.mark.parametrize("name", EXPECTED)
def test_gradient_check(suite, name):
    r = suite[name]
    limit = NETWORK_TOL if name == "toy_network_loss" else OP_TOL
    assert r.tol <= limit
    assert r.max_rel_err < r.tol, f"{name}: {r.max_rel_err:.3e}"


def test_rel_err_floor_and_scale():
    assert rel_err(np.zeros(3), np.full(3, 1e-12)) < 1e-6
    assert rel_err(np.ones(3), 1.01 * np.ones(3)) == pytest.approx(0.01 / 1.01)
    # a zero-gradient block is judged against the largest norm in the check
    pairs = [(np.ones(4), np.ones(4)), (np.zeros(2), np.full(2, 1e-9))]
    assert max_rel_err(pairs) < 1e-6


def test_check_result_pass_flag():
    assert CheckResult("a", 1e-6, 1e-4).passed
    assert not CheckResult("a", 1e-3, 1e-4).passed
    assert not CheckResult("a", float("nan"), 1e-4).passed
