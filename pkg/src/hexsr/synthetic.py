"""Built-in synthetic test images.

The acceptance and demo flows run without any external dataset: constants
and ramps probe exactness, the checkerboard and zone plate probe aliasing,
and the filtered-noise "blobs" image stands in for natural imagery.  All
generators return 3-channel images in digital units [0, 255].
"""

from __future__ import annotations

import numpy as np

from .observe import RasterImage

__all__ = [
    "constant_image",
    "ramp_image",
    "checkerboard_image",
    "zone_plate_image",
    "blobs_image",
    "make_image",
    "GENERATORS",
]


def constant_image(size: int = 128, value: float = 128.0, pitch: float = 1.0) -> RasterImage:
    """Flat image with the same value everywhere."""
    return RasterImage(np.full((3, size, size), float(value)), pitch)


def ramp_image(size: int = 128, pitch: float = 1.0) -> RasterImage:
    """Bilinear ramp across the frame, distinct slope per channel."""
    y, x = np.mgrid[0:size, 0:size].astype(float)
    span = max(size - 1, 1)
    base = (x + y) / (2 * span)
    planes = np.stack([
        255.0 * base,
        255.0 * (0.25 + 0.5 * base),
        255.0 * (x / span),
    ])
    return RasterImage(planes, pitch)


def checkerboard_image(size: int = 128, period: float = 8.0, pitch: float = 1.0) -> RasterImage:
    """Square checkerboard with the given period in micrometers."""
    y, x = np.mgrid[0:size, 0:size].astype(float) * pitch
    cell = ((np.floor(2 * x / period) + np.floor(2 * y / period)) % 2)
    plane = 255.0 * cell
    return RasterImage(np.stack([plane, plane, plane]), pitch)


def zone_plate_image(
    size: int = 256,
    max_frequency: float = 0.15,
    pitch: float = 1.0,
) -> RasterImage:
    """Radial chirp sweeping instantaneous frequency 0 to ``max_frequency``.

    The pattern is 127.5 * (1 + cos(a r^2)) around the image center; the
    instantaneous radial frequency at radius r is a*r/pi cycles/um, reaching
    ``max_frequency`` at the frame's inscribed radius.  The standard probe
    for aliasing: any content beyond a grid's effective cutoff folds into
    visible moire.
    """
    y, x = np.mgrid[0:size, 0:size].astype(float) * pitch
    cx = (size - 1) * pitch / 2.0
    r2 = (x - cx) ** 2 + (y - cx) ** 2
    r_max = cx
    a = np.pi * max_frequency / r_max
    plane = 127.5 * (1.0 + np.cos(a * r2))
    return RasterImage(np.stack([plane, plane, plane]), pitch)


def blobs_image(size: int = 128, seed: int = 0, pitch: float = 1.0) -> RasterImage:
    """Smooth random field with a natural-looking 1/f-like spectrum.

    White noise is shaped in the frequency domain and normalized to a wide
    dynamic range; channels share a base field with mild decorrelation so
    the image behaves like ordinary RGB content.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    f = np.fft.fftfreq(size, d=pitch)
    fu, fv = np.meshgrid(f, f)
    shaping = 1.0 / (np.hypot(fu, fv) + 0.02) ** 1.5

    def field() -> np.ndarray:
        w = rng.normal(size=(size, size))
        sm = np.fft.ifft2(np.fft.fft2(w) * shaping).real
        # percentile stretch: wide dynamic range with mildly clipped tails,
        # giving contrast comparable to ordinary photographs
        lo, hi = np.percentile(sm, [8.0, 92.0])
        return np.clip((sm - lo) / (hi - lo), 0.0, 1.0)

    base = field()
    planes = []
    for _ in range(3):
        mix = np.clip(0.85 * base + 0.15 * field(), 0.0, 1.0)
        planes.append(10.0 + 235.0 * mix)
    return RasterImage(np.stack(planes), pitch)


GENERATORS = {
    "constant": constant_image,
    "ramp": ramp_image,
    "checkerboard": checkerboard_image,
    "zoneplate": zone_plate_image,
    "blobs": blobs_image,
}


def make_image(name: str, size: int = 128, pitch: float = 1.0, seed: int = 0) -> RasterImage:
    """Build a named synthetic image ("constant", "ramp", "checkerboard",
    "zoneplate", "blobs")."""
    if name not in GENERATORS:
        raise ValueError(f"unknown synthetic image {name!r}; choose from {sorted(GENERATORS)}")
    if name == "blobs":
        return blobs_image(size, seed=seed, pitch=pitch)
    if name == "zoneplate":
        return zone_plate_image(size, pitch=pitch)
    gen = GENERATORS[name]
    return gen(size, pitch=pitch)
