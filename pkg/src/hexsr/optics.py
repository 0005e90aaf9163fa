"""Camera OTF model: diffraction-limited optics times detector integration.

The continuous optical transfer function is the product of a circular-pupil
diffraction term and the Fourier transform of the detector active area
(rectangular or hexagonal, both tiling the focal plane at 100% fill factor).
The discrete blur kernel applied to high-resolution imagery is the
impulse-invariant equivalent: the OTF sampled on the DFT frequency grid of
the kernel, truncated at the folding frequency of the HR pitch, and
inverse-transformed.

All lengths are in micrometers, all spatial frequencies in cycles per
micrometer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Voronoi

from .errors import (
    GridTooCoarseError,
    KernelTooSmallError,
    NonPositivePitchError,
)

__all__ = [
    "ChannelOptics",
    "DetectorShape",
    "OtfSpec",
    "DiscretePsf",
    "default_channels",
    "diffraction_otf",
    "detector_otf",
    "frequency_grid",
    "combined_otf",
    "impulse_invariant_psf",
    "otf_volume_fraction_beyond",
    "export_otf_csv",
    "export_psf_csv",
]


@dataclass(frozen=True)
class ChannelOptics:
    """Optical parameters of one color channel.

    Parameters
    ----------
    wavelength : float
        Center wavelength in micrometers.
    f_number : float
        Ratio of focal length to aperture diameter.
    hr_pitch : float
        Pitch of the high-resolution simulation grid in micrometers.
    name : str
        Channel tag ("red", "green", "blue", ...).
    """

    wavelength: float
    f_number: float
    hr_pitch: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.wavelength <= 0 or self.f_number <= 0 or self.hr_pitch <= 0:
            raise NonPositivePitchError(
                "wavelength, f_number and hr_pitch must all be positive"
            )

    @property
    def cutoff_frequency(self) -> float:
        """Diffraction cutoff 1 / (wavelength * f_number), cyc/um."""
        return 1.0 / (self.wavelength * self.f_number)

    @property
    def nyquist_pitch(self) -> float:
        """Largest alias-free sample pitch, 1 / (2 * cutoff_frequency)."""
        return 1.0 / (2.0 * self.cutoff_frequency)

    @property
    def folding_frequency(self) -> float:
        """Folding (half-sampling) frequency of the HR grid, 1 / (2 * hr_pitch)."""
        return 1.0 / (2.0 * self.hr_pitch)


def default_channels(hr_pitch: float = 1.0) -> dict[str, ChannelOptics]:
    """RGB channel presets for the reference f/4 camera (wavelengths in um)."""
    return {
        "red": ChannelOptics(0.620, 4.0, hr_pitch, "red"),
        "green": ChannelOptics(0.540, 4.0, hr_pitch, "green"),
        "blue": ChannelOptics(0.460, 4.0, hr_pitch, "blue"),
    }


def _polygon_area(vertices: np.ndarray) -> float:
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _hex_voronoi_cell(t1: float, t2: float) -> np.ndarray:
    """Voronoi cell of the origin in the two-plane interlaced lattice.

    Lattice points are (m*t1/2, n*t2/2) for m + n even.  The cell of the
    origin against its immediate neighborhood is the detector footprint; its
    area is exactly t1*t2/2, the reciprocal of the lattice density.
    """
    pts = []
    for m in range(-2, 3):
        for n in range(-2, 3):
            if (m + n) % 2 == 0:
                pts.append((m * t1 / 2.0, n * t2 / 2.0))
    pts = np.asarray(pts)
    vor = Voronoi(pts)
    origin_index = int(np.argmin(np.hypot(pts[:, 0], pts[:, 1])))
    region = vor.regions[vor.point_region[origin_index]]
    if -1 in region or len(region) == 0:
        raise ValueError("voronoi cell of the origin is unbounded")
    verts = vor.vertices[region]
    order = np.argsort(np.arctan2(verts[:, 1], verts[:, 0]))
    return verts[order]


@dataclass(frozen=True)
class DetectorShape:
    """Detector active area as a convex polygon (100% fill-factor tile).

    Use the classmethods; ``kind`` is "rectangle" or "hexagon".
    """

    kind: str
    vertices: np.ndarray = field(repr=False)

    @classmethod
    def rectangle(cls, d: float) -> "DetectorShape":
        """Square detector of side ``d`` micrometers, centered at the origin."""
        if d <= 0:
            raise NonPositivePitchError("detector side must be positive")
        h = d / 2.0
        verts = np.array([(-h, -h), (h, -h), (h, h), (-h, h)], dtype=float)
        return cls("rectangle", verts)

    @classmethod
    def hexagon(cls, t1: float, t2: float) -> "DetectorShape":
        """Hexagonal detector: Voronoi cell of the interlaced lattice (t1, t2)."""
        if t1 <= 0 or t2 <= 0:
            raise NonPositivePitchError("lattice pitches must be positive")
        return cls("hexagon", _hex_voronoi_cell(t1, t2))

    @property
    def area(self) -> float:
        """Active area in um^2."""
        return _polygon_area(self.vertices)


def diffraction_otf(rho_normalized):
    """Circular-pupil diffraction OTF at normalized radial frequency.

    ``rho_normalized`` is the radial frequency divided by the cutoff; the
    response is (2/pi) * (acos(rho) - rho*sqrt(1 - rho^2)) below cutoff and
    zero at or beyond it.  Accepts scalars or arrays.
    """
    rho = np.asarray(rho_normalized, dtype=float)
    if np.any(rho < 0):
        raise ValueError("normalized radial frequency must be nonnegative")
    r = np.clip(rho, 0.0, 1.0)
    vals = (2.0 / np.pi) * (np.arccos(r) - r * np.sqrt(1.0 - r * r))
    vals = np.where(rho >= 1.0, 0.0, vals)
    if np.isscalar(rho_normalized):
        return float(vals)
    return vals


def _polygon_ft(vertices: np.ndarray, u, v):
    """Continuous 2-D Fourier transform of a polygon indicator function.

    Exact closed form from the divergence theorem: the area integral of
    exp(-i*2*pi*(u*x + v*y)) reduces to a sum over edges.  Valid for any
    simple polygon with counterclockwise vertices; at (0, 0) the transform
    equals the area.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    kx = 2.0 * np.pi * u
    ky = 2.0 * np.pi * v
    k2 = kx * kx + ky * ky
    out = np.zeros(np.broadcast(kx, ky).shape, dtype=complex)
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    for (ax, ay), (bx, by) in zip(a, b):
        dx, dy = bx - ax, by - ay
        mx, my = (ax + bx) / 2.0, (ay + by) / 2.0
        half_kd = 0.5 * (kx * dx + ky * dy)
        sinc = np.where(half_kd == 0.0, 1.0, np.sin(half_kd) / np.where(half_kd == 0.0, 1.0, half_kd))
        out += (kx * dy - ky * dx) * np.exp(-1j * (kx * mx + ky * my)) * sinc
    area = _polygon_area(vertices)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 1j * out / k2
    near_dc = k2 < 1e-18
    out = np.where(near_dc, area, out)
    return out


def detector_otf(shape: DetectorShape, u, v):
    """Detector-integration OTF: normalized Fourier-transform magnitude.

    The detector blur is the convolution of the scene with the detector
    indicator; its transfer function is the indicator's Fourier transform
    normalized to unit DC gain.  The magnitude is returned, so sinc lobes
    appear as nonnegative ripples.
    """
    ft = _polygon_ft(shape.vertices, u, v)
    vals = np.abs(ft) / shape.area
    if np.isscalar(u) and np.isscalar(v):
        return float(vals)
    return vals


def frequency_grid(extent: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric frequency axes spanning [-extent, extent] with n points each."""
    if n < 3:
        raise ValueError("need at least 3 grid points")
    ax = np.linspace(-extent, extent, n)
    return ax, ax.copy()


@dataclass(frozen=True)
class OtfSpec:
    """Combined OTF sampled on a rectangular frequency grid.

    ``values[i, j]`` is the OTF at (u[j], v[i]).  The generating model is
    kept so downstream code can re-evaluate the OTF exactly at other
    frequencies (the impulse-invariant kernel needs DFT-grid samples).
    """

    u: np.ndarray
    v: np.ndarray
    values: np.ndarray
    channel: str = ""
    optics: ChannelOptics | None = None
    detector: DetectorShape | None = None

    def evaluate(self, u, v):
        """Evaluate the generating OTF model at arbitrary frequencies."""
        if self.optics is None or self.detector is None:
            raise ValueError("OtfSpec does not carry its generating model")
        return _eval_combined(self.optics, self.detector, u, v)


def _eval_combined(ch: ChannelOptics, shape: DetectorShape, u, v):
    rho_c = ch.cutoff_frequency
    rho_n = np.hypot(np.asarray(u, dtype=float), np.asarray(v, dtype=float)) / rho_c
    return diffraction_otf(rho_n) * detector_otf(shape, u, v)


def combined_otf(
    ch: ChannelOptics,
    shape: DetectorShape,
    grid: tuple[np.ndarray, np.ndarray],
) -> OtfSpec:
    """Diffraction times detector OTF on a frequency grid.

    The grid must span at least [-cutoff, cutoff] on both axes and be no
    coarser than cutoff/32, the resolution floor for the volume diagnostics.
    """
    u, v = (np.asarray(grid[0], dtype=float), np.asarray(grid[1], dtype=float))
    rho_c = ch.cutoff_frequency
    for ax, label in ((u, "u"), (v, "v")):
        if ax.ndim != 1 or ax.size < 3:
            raise ValueError(f"{label} axis must be 1-D with >= 3 samples")
        if ax[0] > -rho_c or ax[-1] < rho_c:
            raise ValueError(f"{label} axis must span [-cutoff, cutoff]")
        spacing = np.max(np.diff(ax))
        if spacing > rho_c / 32.0 + 1e-15:
            raise GridTooCoarseError(
                f"{label} spacing {spacing:.4g} exceeds cutoff/32 = {rho_c / 32.0:.4g}"
            )
    uu, vv = np.meshgrid(u, v)
    values = _eval_combined(ch, shape, uu, vv)
    return OtfSpec(u=u, v=v, values=values, channel=ch.name, optics=ch, detector=shape)


@dataclass(frozen=True)
class DiscretePsf:
    """Impulse-invariant discrete blur kernel at the HR pitch.

    ``kernel`` sums to one; ``tail_fraction`` is the estimated energy the
    finite support discards, and ``truncated_volume_fraction`` is the share
    of continuous OTF volume beyond the folding frequency that the
    impulse-invariant construction cuts off (only nonzero when the channel
    cutoff exceeds the folding frequency).
    """

    kernel: np.ndarray
    pitch: float
    dc_gain: float
    tail_fraction: float = 0.0
    truncated_volume_fraction: float = 0.0

    @property
    def size(self) -> int:
        return self.kernel.shape[0]


def _otf_on_dft_grid(otf: OtfSpec, n: int, pitch: float) -> np.ndarray:
    """OTF samples on the n-point DFT frequency grid, in FFT order.

    For odd n every DFT frequency lies strictly inside the folding frequency
    1/(2*pitch), so sampling here realizes the folding-frequency truncation
    of the continuous model.
    """
    freqs = np.fft.fftfreq(n, d=pitch)
    fu, fv = np.meshgrid(freqs, freqs)
    if otf.optics is not None and otf.detector is not None:
        vals = _eval_combined(otf.optics, otf.detector, fu, fv)
    else:
        # No generating model: fall back to bilinear resampling of the
        # stored grid (exact for constant and planar OTFs).
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(
            (otf.v, otf.u), otf.values, bounds_error=False, fill_value=0.0
        )
        vals = interp(np.stack([fv.ravel(), fu.ravel()], axis=1)).reshape(fu.shape)
    folding = 1.0 / (2.0 * pitch)
    vals = np.where((np.abs(fu) > folding) | (np.abs(fv) > folding), 0.0, vals)
    return vals


def impulse_invariant_psf(
    otf: OtfSpec,
    hr_pitch: float,
    kernel_size: int = 129,
    tail_tol: float = 1e-6,
) -> DiscretePsf:
    """Discrete-space blur kernel equivalent to the continuous OTF.

    Samples the OTF on the kernel's DFT frequency grid at the HR pitch
    (content beyond the folding frequency 1/(2*hr_pitch) is truncated),
    inverse-transforms, centers the kernel, and normalizes it to unit sum.

    Raises
    ------
    KernelTooSmallError
        If the energy outside the requested support exceeds ``tail_tol``
        of the total (estimated from a double-size reference kernel).
    """
    if hr_pitch <= 0:
        raise NonPositivePitchError("hr_pitch must be positive")
    if kernel_size % 2 == 0 or kernel_size < 3:
        raise ValueError("kernel_size must be odd and >= 3")

    def _kernel(n: int) -> np.ndarray:
        vals = _otf_on_dft_grid(otf, n, hr_pitch)
        kern = np.fft.fftshift(np.fft.ifft2(vals)).real
        return kern

    ref = _kernel(2 * kernel_size + 1)
    c = kernel_size  # center index of the reference kernel
    h = kernel_size // 2
    inner = ref[c - h : c + h + 1, c - h : c + h + 1]
    total_energy = float(np.sum(ref**2))
    tail = 1.0 - float(np.sum(inner**2)) / total_energy if total_energy > 0 else 0.0
    if tail >= tail_tol:
        raise KernelTooSmallError(
            f"tail energy {tail:.3e} >= {tail_tol:.0e}; increase kernel_size"
        )

    kern = _kernel(kernel_size)
    s = float(kern.sum())
    if s <= 0:
        raise ValueError("kernel sum is nonpositive; OTF is not a valid blur")
    kern = kern / s

    folding = 1.0 / (2.0 * hr_pitch)
    trunc = otf_volume_fraction_beyond(otf, folding)
    return DiscretePsf(
        kernel=kern,
        pitch=hr_pitch,
        dc_gain=float(kern.sum()),
        tail_fraction=tail,
        truncated_volume_fraction=trunc,
    )


def otf_volume_fraction_beyond(otf: OtfSpec, folding_frequency: float) -> float:
    """Fraction of integrated OTF volume outside the square [-f, f]^2.

    Trapezoidal quadrature on the OtfSpec's own grid; the inside integral
    runs over the largest node-aligned rectangle contained in the square, so
    the result carries an O(grid spacing) boundary error.
    """
    if folding_frequency <= 0:
        raise ValueError("folding_frequency must be positive")
    total = float(np.trapezoid(np.trapezoid(otf.values, otf.u, axis=1), otf.v))
    mu = np.abs(otf.u) <= folding_frequency + 1e-15
    mv = np.abs(otf.v) <= folding_frequency + 1e-15
    if not mu.any() or not mv.any():
        return 1.0
    inside_vals = otf.values[np.ix_(mv, mu)]
    inside = float(np.trapezoid(np.trapezoid(inside_vals, otf.u[mu], axis=1), otf.v[mv]))
    if total <= 0:
        return 0.0
    return max(0.0, (total - inside) / total)


def export_otf_csv(otf: OtfSpec, path) -> None:
    """Write the OTF matrix as CSV with the u axis in the header row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v\\u"] + [f"{x:.9g}" for x in otf.u])
        for vi, row in zip(otf.v, otf.values):
            w.writerow([f"{vi:.9g}"] + [f"{x:.9g}" for x in row])


def export_psf_csv(psf: DiscretePsf, path) -> None:
    """Write the PSF kernel as CSV with spatial coordinates in headers."""
    n = psf.size
    coords = (np.arange(n) - n // 2) * psf.pitch
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y\\x"] + [f"{x:.9g}" for x in coords])
        for yc, row in zip(coords, psf.kernel):
            w.writerow([f"{yc:.9g}"] + [f"{x:.9g}" for x in row])
