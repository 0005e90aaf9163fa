"""Image-quality metrics: PSNR and SSIM on luma and full RGB, border-shaved."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ShapeMismatchError
from .observe import RasterImage

__all__ = ["MetricReport", "to_luma", "psnr", "ssim", "evaluate_pair"]


@dataclass(frozen=True)
class MetricReport:
    """Quality of one restored image against its reference."""

    psnr_y: float
    ssim_y: float
    psnr_rgb: float
    ssim_rgb: float
    shave: int = 6


# ITU-R BT.601 studio-swing luma weights for R'G'B' in [0, 255]
_LUMA_W = (65.481, 128.553, 24.966)


def to_luma(img: RasterImage, full_swing: bool = False) -> RasterImage:
    """Y channel of the YCbCr decomposition of an RGB image.

    Default is studio swing: Y = 16 + (65.481 R' + 128.553 G' + 24.966 B')/255,
    mapping black to 16 and white to 235.  ``full_swing`` selects the
    0-255 variant Y = 0.299 R' + 0.587 G' + 0.114 B' instead.
    """
    if img.channels != 3:
        raise ShapeMismatchError("luma conversion needs a 3-channel image")
    r, g, b = img.values
    if full_swing:
        y = 0.299 * r + 0.587 * g + 0.114 * b
    else:
        y = 16.0 + (_LUMA_W[0] * r + _LUMA_W[1] * g + _LUMA_W[2] * b) / 255.0
    return RasterImage(y[None], img.pitch)


def _shaved(a: RasterImage, b: RasterImage, shave: int) -> tuple[np.ndarray, np.ndarray]:
    if a.values.shape != b.values.shape:
        raise ShapeMismatchError("images must have identical shapes")
    if shave < 0 or 2 * shave >= min(a.height, a.width):
        raise ValueError("shave must be less than half the smallest dimension")
    sl = (slice(None), slice(shave, a.height - shave), slice(shave, a.width - shave))
    return a.values[sl], b.values[sl]


def psnr(a: RasterImage, b: RasterImage, peak: float = 255.0, shave: int = 6) -> float:
    """Peak signal-to-noise ratio in dB over the shaved interior.

    All channels pool into a single MSE.  Identical images return the
    +infinity sentinel.
    """
    av, bv = _shaved(a, b, shave)
    mse = float(np.mean((av - bv) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray, peak: float) -> float:
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    win = _gaussian_window()
    mu_x = fftconvolve(x, win, mode="valid")
    mu_y = fftconvolve(y, win, mode="valid")
    xx = fftconvolve(x * x, win, mode="valid") - mu_x * mu_x
    yy = fftconvolve(y * y, win, mode="valid") - mu_y * mu_y
    xy = fftconvolve(x * y, win, mode="valid") - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def ssim(a: RasterImage, b: RasterImage, shave: int = 6, peak: float = 255.0) -> float:
    """Mean local structural similarity over the shaved interior.

    11x11 Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic
    range ``peak``; local windows are fully interior ('valid' sweep).  RGB
    images average the per-channel SSIM values.
    """
    av, bv = _shaved(a, b, shave)
    if av.shape[1] < 11 or av.shape[2] < 11:
        raise ValueError("image too small for an 11x11 SSIM window after shaving")
    vals = [_ssim_plane(av[c], bv[c], peak) for c in range(av.shape[0])]
    return float(np.mean(vals))


def evaluate_pair(result: RasterImage, truth: RasterImage, shave: int = 6) -> MetricReport:
    """PSNR and SSIM on the luma channel and on full RGB."""
    return MetricReport(
        psnr_y=psnr(to_luma(result), to_luma(truth), shave=shave),
        ssim_y=ssim(to_luma(result), to_luma(truth), shave=shave),
        psnr_rgb=psnr(result, truth, shave=shave),
        ssim_rgb=ssim(result, truth, shave=shave),
        shave=shave,
    )
