"""Forward observation model: blur, resample to the detector grid, noise, quantize.

A pristine HR image is blurred with the per-channel impulse-invariant PSF,
resampled onto the low-resolution rectangular or hexagonal grid by bicubic
interpolation (the HR grid is at Nyquist, so this step is accurate), then
degraded by additive white Gaussian noise and 8-bit quantization.

Noise streams are Philox counter-based generators keyed by
``SeedSequence(seed, spawn_key=(image_index, channel, plane))``, so datasets
are bit-reproducible across platforms and images/channels may be processed
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import GridOutsideImageError, PitchMismatchError
from .interp import bicubic_at
from .optics import DiscretePsf
from .sampling import HexGrid, RectGrid

__all__ = [
    "RasterImage",
    "HexImage",
    "NoiseSpec",
    "blur",
    "sample_to_rect",
    "sample_to_hex",
    "add_noise_and_quantize",
    "dihedral_augment",
    "load_png",
    "save_png",
    "save_png_with_sidecar",
]


@dataclass(frozen=True)
class RasterImage:
    """Planar multi-channel image on a rectangular grid with physical pitch.

    ``values`` has shape (channels, height, width) with nominal range
    [0, 255] digital units; pixel (m, n) sits at physical position
    (n*pitch, m*pitch) micrometers from the image anchor.
    """

    values: np.ndarray = field(repr=False)
    pitch: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise ValueError("values must have shape (channels, height, width)")
        if v.shape[0] not in (1, 3):
            raise ValueError("channel count must be 1 or 3")
        if not np.isfinite(v).all():
            raise ValueError("image values must be finite")
        if self.pitch <= 0:
            raise PitchMismatchError("pitch must be positive")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def extent(self) -> tuple[float, float]:
        """Physical (width, height) of the sample hull in um."""
        return ((self.width - 1) * self.pitch, (self.height - 1) * self.pitch)


@dataclass(frozen=True)
class HexImage:
    """Hexagonally sampled image stored as two interlaced rectangular planes."""

    plane0: np.ndarray = field(repr=False)
    plane1: np.ndarray = field(repr=False)
    grid: HexGrid

    def __post_init__(self):
        p0 = np.asarray(self.plane0, dtype=float)
        p1 = np.asarray(self.plane1, dtype=float)
        if p0.ndim != 3 or p1.ndim != 3 or p0.shape[0] != p1.shape[0]:
            raise ValueError("planes must be (channels, rows, cols) with equal channels")
        if abs(p0.shape[1] - p1.shape[1]) > 1 or abs(p0.shape[2] - p1.shape[2]) > 1:
            raise ValueError("interlace planes must agree in size within one row/col")
        if not (np.isfinite(p0).all() and np.isfinite(p1).all()):
            raise ValueError("image values must be finite")
        expect0 = self.grid.plane_shape(0)
        expect1 = self.grid.plane_shape(1)
        if p0.shape[1:] != expect0 or p1.shape[1:] != expect1:
            raise ValueError("plane shapes must match the grid's per-plane dims")
        object.__setattr__(self, "plane0", p0)
        object.__setattr__(self, "plane1", p1)

    @property
    def channels(self) -> int:
        return self.plane0.shape[0]

    @property
    def sample_count(self) -> int:
        return self.plane0.shape[1] * self.plane0.shape[2] + self.plane1.shape[1] * self.plane1.shape[2]


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise level (digital units) and RNG seed."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def blur(hr: RasterImage, psf_per_channel: list[DiscretePsf]) -> RasterImage:
    """Per-channel 2-D convolution with the blur kernels, same output size.

    The image is extended symmetrically (half-sample mirror) before the
    frequency-domain convolution, which keeps flat regions exactly flat up
    to the border.
    """
    if len(psf_per_channel) != hr.channels:
        raise ValueError("need one PSF per channel")
    out = np.empty_like(hr.values)
    for c, psf in enumerate(psf_per_channel):
        if abs(psf.pitch - hr.pitch) > 1e-12 * max(psf.pitch, hr.pitch):
            raise PitchMismatchError(
                f"PSF pitch {psf.pitch} differs from image pitch {hr.pitch}"
            )
        half = psf.size // 2
        padded = np.pad(hr.values[c], half, mode="symmetric")
        full = fftconvolve(padded, psf.kernel, mode="same")
        out[c] = full[half : half + hr.height, half : half + hr.width]
    return RasterImage(out, hr.pitch)


def _grid_queries(img: RasterImage, coords: np.ndarray) -> np.ndarray:
    """Evaluate the image at physical coordinates via bicubic interpolation."""
    xq = coords[:, 0] / img.pitch
    yq = coords[:, 1] / img.pitch
    tol = 1e-9
    if (
        xq.min() < -tol
        or yq.min() < -tol
        or xq.max() > img.width - 1 + tol
        or yq.max() > img.height - 1 + tol
    ):
        raise GridOutsideImageError(
            "sampling grid extends beyond the source image extent"
        )
    return bicubic_at(img.values, xq, yq)


def sample_to_rect(deg: RasterImage, lr_grid: RectGrid) -> RasterImage:
    """Resample onto a rectangular LR grid by bicubic interpolation.

    When the LR pitch is an integer multiple of the image pitch and the
    grids are aligned this reduces to exact decimation, because the bicubic
    kernel interpolates.
    """
    coords = lr_grid.coordinates()
    vals = _grid_queries(deg, coords)
    out = vals.reshape(deg.channels, lr_grid.rows, lr_grid.cols)
    return RasterImage(out, lr_grid.pitch)


def sample_to_hex(deg: RasterImage, hex_grid: HexGrid) -> HexImage:
    """Resample onto the hexagonal lattice (both interlace planes)."""
    planes = []
    for plane in (0, 1):
        rows, cols = hex_grid.plane_shape(plane)
        coords = hex_grid.plane_coordinates(plane)
        vals = _grid_queries(deg, coords)
        planes.append(vals.reshape(deg.channels, rows, cols))
    return HexImage(planes[0], planes[1], hex_grid)


def _noise_stream(seed: int, image_index: int, channel: int, plane: int) -> np.random.Generator:
    seq = np.random.SeedSequence(seed, spawn_key=(image_index, channel, plane))
    return np.random.Generator(np.random.Philox(seq))


def _degrade_plane(plane: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    noisy = plane + (rng.normal(0.0, sigma, size=plane.shape) if sigma > 0 else 0.0)
    return np.rint(np.clip(noisy, 0.0, 255.0))


def add_noise_and_quantize(img, noise: NoiseSpec, image_index: int = 0):
    """Add per-sample Gaussian noise, clip to [0, 255], round to integers.

    Deterministic given (noise.seed, image_index): every channel (and, for
    hexagonal images, every interlace plane) draws from its own Philox
    stream.  Returns the same image type as the input.
    """
    if isinstance(img, RasterImage):
        out = np.empty_like(img.values)
        for c in range(img.channels):
            rng = _noise_stream(noise.seed, image_index, c, 0)
            out[c] = _degrade_plane(img.values[c], noise.sigma, rng)
        return RasterImage(out, img.pitch)
    if isinstance(img, HexImage):
        p0 = np.empty_like(img.plane0)
        p1 = np.empty_like(img.plane1)
        for c in range(img.channels):
            p0[c] = _degrade_plane(
                img.plane0[c], noise.sigma, _noise_stream(noise.seed, image_index, c, 0)
            )
            p1[c] = _degrade_plane(
                img.plane1[c], noise.sigma, _noise_stream(noise.seed, image_index, c, 1)
            )
        return HexImage(p0, p1, img.grid)
    raise TypeError(f"unsupported image type {type(img).__name__}")


# The eight elements of the dihedral group of the square, as (transpose,
# flip_lr, flip_ud) switches applied in that order.
DIHEDRAL_OPS: tuple[tuple[bool, bool, bool], ...] = (
    (False, False, False),
    (False, True, False),
    (False, False, True),
    (False, True, True),
    (True, False, False),
    (True, True, False),
    (True, False, True),
    (True, True, True),
)


def apply_dihedral(values: np.ndarray, op: tuple[bool, bool, bool]) -> np.ndarray:
    """Apply one dihedral element to (C, H, W) values."""
    transpose, flip_lr, flip_ud = op
    out = values
    if transpose:
        out = np.swapaxes(out, 1, 2)
    if flip_lr:
        out = out[:, :, ::-1]
    if flip_ud:
        out = out[:, ::-1, :]
    return np.ascontiguousarray(out)


def dihedral_augment(img: RasterImage) -> list[RasterImage]:
    """All eight flip/transpose variants of the image (the group of the square).

    Augmentation happens on the pristine HR image, before the observation
    model is applied.
    """
    return [RasterImage(apply_dihedral(img.values, op), img.pitch) for op in DIHEDRAL_OPS]


def load_png(path, pitch: float = 1.0) -> RasterImage:
    """Read an 8-bit PNG as a float image in digital units."""
    from PIL import Image

    with Image.open(path) as im:
        im = im.convert("RGB")
        arr = np.asarray(im, dtype=float)
    return RasterImage(np.moveaxis(arr, -1, 0), pitch)


def save_png(img: RasterImage, path) -> None:
    """Write the image as an 8-bit PNG (values rounded and clipped)."""
    from PIL import Image

    arr = np.moveaxis(np.rint(np.clip(img.values, 0, 255)).astype(np.uint8), 0, -1)
    if arr.shape[-1] == 1:
        arr = arr[..., 0]
    Image.fromarray(arr).save(path)


def save_png_with_sidecar(img: RasterImage, path, metadata: dict) -> None:
    """Write a PNG plus a '<path>.meta.txt' sidecar of sorted key: value lines."""
    save_png(img, path)
    side = str(path) + ".meta.txt"
    lines = [f"{k}: {metadata[k]}" for k in sorted(metadata)]
    lines.append(f"pitch: {img.pitch!r}")
    with open(side, "w") as fh:
        fh.write("\n".join(lines) + "\n")
