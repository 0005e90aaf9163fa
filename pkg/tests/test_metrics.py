import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hexsr import metrics as M
from hexsr import synthetic as Y
from hexsr.errors import ShapeMismatchError
from hexsr.observe import RasterImage


def test_luma_reference_points():
    assert M.to_luma(Y.constant_image(16, 255.0)).values[0, 0, 0] == pytest.approx(235.0, abs=0.01)
    assert M.to_luma(Y.constant_image(16, 0.0)).values[0, 0, 0] == pytest.approx(16.0, abs=1e-9)
    g = M.to_luma(Y.constant_image(16, 128.0)).values[0, 0, 0]
    assert 16.0 < g < 235.0
    assert M.to_luma(Y.constant_image(16, 255.0), full_swing=True).values[0, 0, 0] == pytest.approx(255.0, abs=0.01)


@given(st.integers(0, 254))
def test_luma_monotone_in_gray(level):
    a = M.to_luma(Y.constant_image(13, float(level))).values[0, 0, 0]
    b = M.to_luma(Y.constant_image(13, float(level + 1))).values[0, 0, 0]
    assert b > a


def test_luma_needs_three_channels():
    with pytest.raises(ShapeMismatchError):
        M.to_luma(RasterImage(np.zeros((1, 8, 8)), 1.0))


def test_psnr_identical_is_inf():
    img = Y.blobs_image(32, seed=0)
    assert M.psnr(img, img) == math.inf


def test_psnr_unit_mse():
    img = Y.constant_image(32, 100.0)
    other = RasterImage(img.values + 1.0, 1.0)
    want = 20.0 * math.log10(255.0)
    assert M.psnr(img, other) == pytest.approx(48.1308, abs=1e-3)
    assert M.psnr(img, other) == pytest.approx(want, abs=1e-9)


def test_psnr_symmetry():
    a = Y.blobs_image(32, seed=1)
    b = Y.blobs_image(32, seed=2)
    assert M.psnr(a, b) == M.psnr(b, a)


def test_metrics_ignore_border():
    a = Y.blobs_image(40, seed=3)
    b = Y.blobs_image(40, seed=4)
    p0, s0 = M.psnr(a, b), M.ssim(a, b)
    corrupted = b.values.copy()
    corrupted[:, :6, :] = 255.0
    corrupted[:, -6:, :] = 0.0
    corrupted[:, :, :6] = 17.0
    corrupted[:, :, -6:] = 99.0
    b2 = RasterImage(corrupted, 1.0)
    assert M.psnr(a, b2) == p0
    assert M.ssim(a, b2) == s0


def test_ssim_self_is_exactly_one():
    img = Y.blobs_image(40, seed=5)
    assert M.ssim(img, img) == 1.0


def test_ssim_inverted_below_one():
    img = Y.blobs_image(40, seed=6)
    inv = RasterImage(255.0 - img.values, 1.0)
    assert M.ssim(img, inv) < 1.0


def test_ssim_constant_offset_closed_form():
    mu_a, delta = 100.0, 10.0
    a = Y.constant_image(40, mu_a)
    b = Y.constant_image(40, mu_a + delta)
    c1 = (0.01 * 255.0) ** 2
    want = (2 * mu_a * (mu_a + delta) + c1) / (mu_a**2 + (mu_a + delta) ** 2 + c1)
    assert M.ssim(a, b) == pytest.approx(want, abs=1e-9)


def test_ssim_range_on_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = RasterImage(rng.uniform(0, 255, (3, 36, 36)), 1.0)
        b = RasterImage(rng.uniform(0, 255, (3, 36, 36)), 1.0)
        v = M.ssim(a, b)
        assert -1.0 <= v <= 1.0


def test_ssim_too_small_image():
    a = Y.constant_image(20, 1.0)
    with pytest.raises(ValueError):
        M.ssim(a, a, shave=6)  # 8x8 interior < 11x11 window


def test_evaluate_pair_report():
    a = Y.blobs_image(40, seed=8)
    rep = M.evaluate_pair(a, a)
    assert rep.psnr_y == math.inf and rep.psnr_rgb == math.inf
    assert rep.ssim_y == 1.0 and rep.ssim_rgb == 1.0
    assert rep.shave == 6
