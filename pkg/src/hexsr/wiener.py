"""Frequency-domain Wiener restoration with a fitted noise-to-signal ratio.

One filter per color channel, built from the observation model's blur
kernel for that channel: G = H* / (|H|^2 + nsr).  The NSR scalar is fitted
on training pairs by minimizing MSE over a log-spaced scan refined with
golden-section search, then averaged across the training images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrainingSetError, PitchMismatchError
from .observe import RasterImage
from .optics import DiscretePsf

__all__ = ["WienerFilterSpec", "wiener_restore", "fit_nsr", "NsrFit"]


@dataclass(frozen=True)
class WienerFilterSpec:
    """Restoration filter parameters for one channel."""

    psf: DiscretePsf
    nsr: float
    channel: str = ""

    def __post_init__(self):
        if self.nsr < 0:
            raise ValueError("nsr must be nonnegative")


def _restore_plane(plane: np.ndarray, kernel: np.ndarray, nsr: float) -> np.ndarray:
    """Wiener-filter one plane on a symmetrically padded array."""
    pad = kernel.shape[0]
    padded = np.pad(plane, pad, mode="symmetric")
    ph, pw = padded.shape
    kpad = np.zeros((ph, pw))
    k = kernel.shape[0]
    kpad[:k, :k] = kernel
    # center the kernel at the origin so H has (near) zero phase
    kpad = np.roll(kpad, (-(k // 2), -(k // 2)), axis=(0, 1))
    H = np.fft.fft2(kpad)
    denom = np.abs(H) ** 2 + nsr
    G = np.where(denom > 0, np.conj(H) / np.where(denom > 0, denom, 1.0), 0.0)
    restored = np.fft.ifft2(np.fft.fft2(padded) * G)
    return restored.real[pad : pad + plane.shape[0], pad : pad + plane.shape[1]]


def wiener_restore(img: RasterImage, spec: WienerFilterSpec) -> RasterImage:
    """Apply the Wiener filter to every channel of an image.

    The image pitch must equal the pitch the PSF is defined at (restoration
    runs on the interpolated HR-pitch grid).  Frequencies where both |H|
    and nsr vanish get zero gain (the pseudo-inverse convention).
    """
    if abs(spec.psf.pitch - img.pitch) > 1e-12 * max(spec.psf.pitch, img.pitch):
        raise PitchMismatchError(
            f"image pitch {img.pitch} differs from PSF pitch {spec.psf.pitch}"
        )
    out = np.stack(
        [_restore_plane(img.values[c], spec.psf.kernel, spec.nsr) for c in range(img.channels)]
    )
    return RasterImage(out, img.pitch)


def _pair_mse(degraded: RasterImage, truth: RasterImage, psf: DiscretePsf, nsr: float) -> float:
    restored = wiener_restore(degraded, WienerFilterSpec(psf, nsr))
    return float(np.mean((restored.values - truth.values) ** 2))


@dataclass(frozen=True)
class NsrFit:
    """Fitting record: the averaged NSR plus per-image optima and method tag."""

    nsr: float
    per_image: tuple[float, ...]
    method: str


def fit_nsr(
    pairs: list[tuple[RasterImage, RasterImage]],
    psf: DiscretePsf,
    search_range: tuple[float, float] = (1e-5, 1.0),
    scan_points: int = 50,
    golden_iters: int = 40,
) -> float:
    """MSE-minimizing noise-to-signal ratio, averaged over training pairs.

    For each (degraded, truth) pair the search runs over log10(nsr): a
    coarse ``scan_points``-point scan brackets the global minimum (MSE as a
    function of nsr is not guaranteed unimodal), then golden-section search
    refines it for ``golden_iters`` iterations.  Returns the arithmetic
    mean of the per-image optima; use :func:`fit_nsr_detailed` to keep the
    per-image values and the method tag for experiment metadata.
    """
    return fit_nsr_detailed(pairs, psf, search_range, scan_points, golden_iters).nsr


def fit_nsr_detailed(
    pairs: list[tuple[RasterImage, RasterImage]],
    psf: DiscretePsf,
    search_range: tuple[float, float] = (1e-5, 1.0),
    scan_points: int = 50,
    golden_iters: int = 40,
) -> NsrFit:
    if not pairs:
        raise EmptyTrainingSetError("fit_nsr requires at least one training pair")
    lo, hi = search_range
    if not (0 < lo < hi):
        raise ValueError("invalid search range")
    optima = []
    for degraded, truth in pairs:
        f = lambda log_nsr: _pair_mse(degraded, truth, psf, 10.0**log_nsr)
        la, lb = math.log10(lo), math.log10(hi)
        grid = np.linspace(la, lb, scan_points)
        vals = [f(g) for g in grid]
        i = int(np.argmin(vals))
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, scan_points - 1)]
        optima.append(10.0 ** _golden_section(f, a, b, golden_iters))
    return NsrFit(float(np.mean(optima)), tuple(optima), "log-scan+golden-section")


def _golden_section(f, a: float, b: float, iters: int) -> float:
    """Minimize f on [a, b] by golden-section search; returns the midpoint."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0
