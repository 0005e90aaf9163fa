"""Separable bicubic interpolation at arbitrary sample positions.

Uses the Keys kernel with a = -0.5, the classic convolutional cubic that
interpolates (passes through the samples exactly) and reproduces
polynomials up to cubic degree away from the image boundary.  Boundary taps
use half-sample symmetric extension.
"""

from __future__ import annotations

import numpy as np

_A = -0.5


def keys_kernel(s):
    """Keys (a = -0.5) cubic interpolation kernel, vectorized."""
    s = np.abs(np.asarray(s, dtype=float))
    s2 = s * s
    s3 = s2 * s
    near = (_A + 2.0) * s3 - (_A + 3.0) * s2 + 1.0
    far = _A * s3 - 5.0 * _A * s2 + 8.0 * _A * s - 4.0 * _A
    return np.where(s <= 1.0, near, np.where(s < 2.0, far, 0.0))


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    """Half-sample symmetric index fold: ...2 1 0 | 0 1 2 ... n-1 | n-1 n-2..."""
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n
    m = np.mod(idx, period)
    return np.where(m >= n, period - 1 - m, m)


def bicubic_at(values: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
    """Evaluate channel planes at fractional pixel positions.

    Parameters
    ----------
    values : (C, H, W) array
        Source planes; pixel (m, n) sits at position (x, y) = (n, m).
    xq, yq : arrays of equal shape
        Query positions in pixel units.

    Returns
    -------
    (C,) + xq.shape array of interpolated values.
    """
    values = np.asarray(values, dtype=float)
    c, h, w = values.shape
    xq = np.asarray(xq, dtype=float)
    yq = np.asarray(yq, dtype=float)
    out_shape = (c,) + xq.shape
    xf = xq.ravel()
    yf = yq.ravel()

    ix = np.floor(xf).astype(np.int64)
    iy = np.floor(yf).astype(np.int64)
    fx = xf - ix
    fy = yf - iy

    acc = np.zeros((c, xf.size), dtype=float)
    wx = [keys_kernel(fx - t) for t in (-1, 0, 1, 2)]
    wy = [keys_kernel(fy - t) for t in (-1, 0, 1, 2)]
    cols = [_reflect(ix + t, w) for t in (-1, 0, 1, 2)]
    rows = [_reflect(iy + t, h) for t in (-1, 0, 1, 2)]
    for a in range(4):
        for b in range(4):
            acc += wy[a] * wx[b] * values[:, rows[a], cols[b]]
    return acc.reshape(out_shape)
