import numpy as np
import pytest

from hexsr import wiener as W
from hexsr import synthetic as Y
from hexsr.errors import EmptyTrainingSetError, PitchMismatchError
from hexsr.metrics import psnr
from hexsr.observe import NoiseSpec, RasterImage, add_noise_and_quantize, blur
from hexsr.optics import DiscretePsf


def _delta_psf(size=5):
    k = np.zeros((size, size))
    k[size // 2, size // 2] = 1.0
    return DiscretePsf(k, 1.0, 1.0)


def _bandlimited_image(size=96, f_max=0.18):
    # periodic sum of sinusoids, all below the first detector-OTF zero
    y, x = np.mgrid[0:size, 0:size].astype(float)
    rng = np.random.default_rng(7)
    plane = np.zeros((size, size))
    for _ in range(12):
        fx = rng.uniform(-f_max, f_max)
        fy = rng.uniform(-f_max, f_max)
        phase = rng.uniform(0, 2 * np.pi)
        plane += rng.uniform(5, 25) * np.cos(2 * np.pi * (fx * x + fy * y) + phase)
    plane += 128.0
    return RasterImage(np.stack([plane] * 3), 1.0)


def test_delta_psf_scales_by_one_over_one_plus_nsr():
    img = Y.blobs_image(32, seed=0)
    for nsr in (0.0, 1e-2, 1.0):
        out = W.wiener_restore(img, W.WienerFilterSpec(_delta_psf(), nsr))
        assert np.max(np.abs(out.values - img.values / (1.0 + nsr))) < 1e-9


def test_constant_image_dc_gain(psf_green_rect):
    img = Y.constant_image(48, 200.0)
    nsr = 0.05
    out = W.wiener_restore(img, W.WienerFilterSpec(psf_green_rect, nsr))
    assert np.max(np.abs(out.values - 200.0 / (1.0 + nsr))) < 1e-9


def test_noiseless_matched_restoration(psf_green_rect):
    truth = _bandlimited_image(128)
    blurred = blur(truth, [psf_green_rect] * 3)
    restored = W.wiener_restore(blurred, W.WienerFilterSpec(psf_green_rect, 0.0))
    pad = psf_green_rect.size
    err = (restored.values - truth.values)[:, pad:-pad, pad:-pad]
    ref = truth.values[:, pad:-pad, pad:-pad]
    rel_rms = np.sqrt(np.mean(err**2)) / np.sqrt(np.mean((ref - ref.mean()) ** 2))
    assert rel_rms < 0.01


def test_restoration_improves_noisy_blurred_images(psf_green_rect):
    for name, seed in (("blobs", 3), ("checkerboard", 0), ("zoneplate", 0)):
        truth = Y.make_image(name, size=96, seed=seed)
        degraded = add_noise_and_quantize(blur(truth, [psf_green_rect] * 3), NoiseSpec(1.0, 5))
        restored = W.wiener_restore(degraded, W.WienerFilterSpec(psf_green_rect, 1e-3))
        mse_before = np.mean((degraded.values - truth.values) ** 2)
        mse_after = np.mean((restored.values - truth.values) ** 2)
        assert mse_after < mse_before, name
        assert psnr(restored, truth) > psnr(degraded, truth)


def test_linearity(psf_green_rect):
    img = Y.blobs_image(32, seed=1)
    spec = W.WienerFilterSpec(psf_green_rect, 1e-2)
    a = W.wiener_restore(RasterImage(3.0 * img.values, 1.0), spec)
    b = W.wiener_restore(img, spec)
    assert np.max(np.abs(a.values - 3.0 * b.values)) < 1e-9 * np.abs(a.values).max()


def test_pitch_mismatch(psf_green_rect):
    img = Y.constant_image(16, 1.0, pitch=2.0)
    with pytest.raises(PitchMismatchError):
        W.wiener_restore(img, W.WienerFilterSpec(psf_green_rect, 0.1))


def test_fit_nsr_recovers_planted_optimum(psf_green_rect):
    degraded = add_noise_and_quantize(
        blur(Y.blobs_image(64, seed=2), [psf_green_rect] * 3), NoiseSpec(1.0, 11)
    )
    planted = 1e-2
    truth = W.wiener_restore(degraded, W.WienerFilterSpec(psf_green_rect, planted))
    fitted = W.fit_nsr([(degraded, truth)], psf_green_rect)
    assert planted / 1.5 <= fitted <= planted * 1.5


def test_fit_nsr_noiseless_prefers_lower_bound(psf_green_rect):
    truth = _bandlimited_image(64)
    blurred = blur(truth, [psf_green_rect] * 3)
    fitted = W.fit_nsr([(blurred, truth)], psf_green_rect)
    assert fitted < 3e-5  # at or near the 1e-5 lower bound


def test_fit_nsr_mean_of_identical_pairs(psf_green_rect):
    degraded = add_noise_and_quantize(
        blur(Y.blobs_image(48, seed=4), [psf_green_rect] * 3), NoiseSpec(1.0, 3)
    )
    truth = Y.blobs_image(48, seed=4)
    one = W.fit_nsr([(degraded, truth)], psf_green_rect)
    two = W.fit_nsr([(degraded, truth), (degraded, truth)], psf_green_rect)
    assert one == two


def test_fit_nsr_empty_pairs(psf_green_rect):
    with pytest.raises(EmptyTrainingSetError):
        W.fit_nsr([], psf_green_rect)


def test_fit_nsr_metadata(psf_green_rect):
    degraded = add_noise_and_quantize(
        blur(Y.blobs_image(32, seed=6), [psf_green_rect] * 3), NoiseSpec(1.0, 2)
    )
    truth = Y.blobs_image(32, seed=6)
    fit = W.fit_nsr_detailed([(degraded, truth)], psf_green_rect)
    assert fit.method == "log-scan+golden-section"
    assert len(fit.per_image) == 1
    assert fit.nsr == fit.per_image[0]
