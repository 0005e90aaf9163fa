"""Hexagonal-to-rectangular resampling and the sub-pixel distance matrix.

Nonuniform interpolation triangulates the scattered hexagonal samples
(Delaunay) and interpolates linearly inside each triangle; rectangular
imagery is upsampled with the separable Keys bicubic.  The distance matrix
records, for every target pixel, the Euclidean distance to the nearest
hexagonal sample; it is the auxiliary input that tells a learned restorer
how reliable the interpolated value is at each pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import LinearNDInterpolator
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import (
    DegenerateTriangulationError,
    UnsupportedFactorError,
)
from .interp import bicubic_at
from .observe import HexImage, RasterImage
from .sampling import RectGrid

__all__ = [
    "ScatterSet",
    "DistanceMatrix",
    "nonuniform_interpolate",
    "bicubic_upsample",
    "distance_matrix",
]


@dataclass(frozen=True)
class ScatterSet:
    """Scattered samples: (N, 2) coordinates in um and (N, C) values."""

    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be an (N, 2) array")
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != pts.shape[0]:
            raise ValueError("one value row per point required")
        if pts.shape[0] < 3:
            raise DegenerateTriangulationError("need at least 3 points")
        if cKDTree(pts).query_pairs(1e-9):
            raise ValueError("duplicate points (within 1e-9 um)")
        centered = pts - pts.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-9) < 2:
            raise DegenerateTriangulationError("points are collinear")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_hex_image(cls, img: HexImage) -> "ScatterSet":
        """Flatten a hexagonal image into scattered (coordinate, value) rows."""
        pts = img.grid.coordinates()
        c = img.channels
        v0 = img.plane0.reshape(c, -1).T
        v1 = img.plane1.reshape(c, -1).T
        return cls(pts, np.concatenate([v0, v1], axis=0))

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    """Per-target-pixel distance (um) to the nearest hexagonal source sample."""

    values: np.ndarray = field(repr=False)
    grid: RectGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.rows, self.grid.cols):
            raise ValueError("distance values must match the target grid shape")
        if (v < 0).any():
            raise ValueError("distances must be nonnegative")
        object.__setattr__(self, "values", v)


def nonuniform_interpolate(src: HexImage, target: RectGrid) -> RasterImage:
    """Resample hexagonal samples onto a rectangular grid.

    Delaunay triangulation plus barycentric linear interpolation, applied
    independently per channel.  Target points outside the convex hull of
    the source samples are filled with 0.
    """
    scatter = ScatterSet.from_hex_image(src)
    try:
        tri = Delaunay(scatter.points)
    except QhullError as exc:
        raise DegenerateTriangulationError(str(exc)) from exc
    interp = LinearNDInterpolator(tri, scatter.values, fill_value=0.0)
    out = interp(target.coordinates())  # (rows*cols, C)
    out = out.T.reshape(scatter.channels, target.rows, target.cols)
    return RasterImage(out, target.pitch)


def bicubic_upsample(src: RasterImage, factor: int) -> RasterImage:
    """Keys bicubic upsampling by an integer factor (2 or 4).

    Output pixel k sits at source position k/factor, so source pixels are
    reproduced exactly at the collocated refined positions.
    """
    if factor not in (2, 4):
        raise UnsupportedFactorError("factor must be 2 or 4")
    h, w = src.height, src.width
    xs = np.arange(w * factor) / factor
    ys = np.arange(h * factor) / factor
    xq, yq = np.meshgrid(xs, ys)
    out = bicubic_at(src.values, xq, yq)
    return RasterImage(out, src.pitch / factor)


def distance_matrix(src_points, target: RectGrid) -> DistanceMatrix:
    """Exact Euclidean nearest-source distance for every target pixel.

    Accepts a ScatterSet or a bare (N, 2) coordinate array; distances come
    from a k-d tree query and equal the brute-force all-pairs minimum.
    """
    pts = src_points.points if isinstance(src_points, ScatterSet) else np.asarray(src_points, dtype=float)
    if pts.size == 0:
        raise ValueError("source point set is empty")
    tree = cKDTree(pts)
    d, _ = tree.query(target.coordinates(), k=1)
    return DistanceMatrix(d.reshape(target.rows, target.cols), target)
