"""Minimal reverse-mode layers for the learned restorer.

Each layer owns its parameters and gradient buffers, caches what it needs
during ``forward``, and returns the input gradient from ``backward``.
Gradients accumulate into ``.grad`` until ``zero_grad`` is called; a
``backward`` must always follow its matching ``forward`` (caches are
overwritten by the next forward pass).
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError

__all__ = ["Parameter", "Conv2d", "ReLU", "ChannelAttention", "PixelShuffle"]


class Parameter:
    """A learnable array with an accumulated gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def zero_grad(self):
        self.grad[...] = 0.0


def _fan_in_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d:
    """'Same' 2-D convolution with zero padding and bias."""

    def __init__(self, c_in: int, c_out: int, ksize: int, rng: np.random.Generator,
                 name: str = "conv", dtype=np.float64):
        if ksize % 2 != 1:
            raise ValueError("kernel size must be odd")
        self.c_in, self.c_out, self.ksize = c_in, c_out, ksize
        self.w = Parameter(
            f"{name}.w",
            _fan_in_uniform(rng, (c_out, c_in, ksize, ksize), c_in * ksize * ksize, dtype),
        )
        self.b = Parameter(f"{name}.b", np.zeros(c_out, dtype=dtype))
        self._cols = None
        self._in_shape = None

    def parameters(self):
        return [self.w, self.b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeMismatchError(
                f"{self.w.name}: expected (B, {self.c_in}, H, W), got {x.shape}"
            )
        b, _, h, w = x.shape
        k = self.ksize
        p = k // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
        cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(b, self.c_in * k * k, h * w)
        self._cols = cols
        self._in_shape = x.shape
        wf = self.w.value.reshape(self.c_out, -1)
        y = np.matmul(wf, cols) + self.b.value[None, :, None]
        return y.reshape(b, self.c_out, h, w)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        b, _, h, w = self._in_shape
        k = self.ksize
        p = k // 2
        gyf = gy.reshape(b, self.c_out, h * w)
        self.w.grad += np.matmul(gyf, self._cols.transpose(0, 2, 1)).sum(axis=0).reshape(self.w.value.shape)
        self.b.grad += gy.sum(axis=(0, 2, 3))
        wf = self.w.value.reshape(self.c_out, -1)
        gcols = np.matmul(wf.T, gyf).reshape(b, self.c_in, k, k, h, w)
        gxp = np.zeros((b, self.c_in, h + 2 * p, w + 2 * p), dtype=gy.dtype)
        for ki in range(k):
            for kj in range(k):
                gxp[:, :, ki : ki + h, kj : kj + w] += gcols[:, :, ki, kj]
        return gxp[:, :, p : p + h, p : p + w]


class ReLU:
    def __init__(self):
        self._mask = None

    def parameters(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        return np.where(self._mask, gy, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class ChannelAttention:
    """Squeeze-gate: global average pool, bottleneck MLP, sigmoid scaling.

    The pooled per-channel statistic passes through a 1x1 conv pair
    (C -> C/r -> C) and a sigmoid; the resulting gate in (0, 1) rescales
    each channel of the input feature map.
    """

    def __init__(self, channels: int, reduction: int, rng: np.random.Generator,
                 name: str = "ca", dtype=np.float64):
        if channels % reduction != 0:
            raise ShapeMismatchError("channels must be divisible by the reduction")
        cr = channels // reduction
        self.channels = channels
        self.w1 = Parameter(f"{name}.down.w", _fan_in_uniform(rng, (cr, channels), channels, dtype))
        self.b1 = Parameter(f"{name}.down.b", np.zeros(cr, dtype=dtype))
        self.w2 = Parameter(f"{name}.up.w", _fan_in_uniform(rng, (channels, cr), cr, dtype))
        self.b2 = Parameter(f"{name}.up.b", np.zeros(channels, dtype=dtype))
        self._cache = None

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def gate(self, x: np.ndarray) -> np.ndarray:
        """The per-channel gate values for a feature map (no caching)."""
        s = x.mean(axis=(2, 3))
        z1 = np.maximum(s @ self.w1.value.T + self.b1.value, 0.0)
        return _sigmoid(z1 @ self.w2.value.T + self.b2.value)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatchError(f"attention expects (B, {self.channels}, H, W)")
        s = x.mean(axis=(2, 3))
        a1 = s @ self.w1.value.T + self.b1.value
        z1 = np.maximum(a1, 0.0)
        a2 = z1 @ self.w2.value.T + self.b2.value
        g = _sigmoid(a2)
        self._cache = (x, s, a1, z1, g)
        return x * g[:, :, None, None]

    def backward(self, gy: np.ndarray) -> np.ndarray:
        x, s, a1, z1, g = self._cache
        hw = x.shape[2] * x.shape[3]
        ggate = (gy * x).sum(axis=(2, 3))
        gx = gy * g[:, :, None, None]
        da2 = ggate * g * (1.0 - g)
        self.w2.grad += da2.T @ z1
        self.b2.grad += da2.sum(axis=0)
        gz1 = da2 @ self.w2.value
        da1 = np.where(a1 > 0, gz1, 0.0)
        self.w1.grad += da1.T @ s
        self.b1.grad += da1.sum(axis=0)
        gs = da1 @ self.w1.value
        gx += gs[:, :, None, None] / hw
        return gx


class PixelShuffle:
    """Sub-pixel rearrangement: (B, r^2*C, H, W) -> (B, C, r*H, r*W).

    Input channel c*r^2 + i*r + j maps to output channel c at the (i, j)
    sub-pixel offset.
    """

    def __init__(self, r: int = 2):
        self.r = r
        self._in_shape = None

    def parameters(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, c_in, h, w = x.shape
        r = self.r
        if c_in % (r * r) != 0:
            raise ShapeMismatchError(f"channels {c_in} not divisible by r^2 = {r * r}")
        self._in_shape = x.shape
        c = c_in // (r * r)
        y = x.reshape(b, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
        return y.reshape(b, c, h * r, w * r)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        b, c_in, h, w = self._in_shape
        r = self.r
        c = c_in // (r * r)
        g = gy.reshape(b, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4)
        return g.reshape(b, c_in, h, w)
