"""The learned restorer: residual groups with channel attention, a shallow
feature head, an optional distance-matrix head, and a pixel-shuffle tail.

The network maps an interpolated color image (plus, when enabled, the
sub-pixel distance matrix of its resampling step) to a higher-resolution
image.  The shallow feature F0 is the sum of the image head and the
distance head; the body output re-joins F0 through a long skip connection,
so a zero-weighted body passes F0 through unchanged.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import (
    MissingDistanceError,
    NonFiniteGradientError,
    ShapeMismatchError,
)
from ..observe import RasterImage
from ..resample import DistanceMatrix
from .layers import ChannelAttention, Conv2d, Parameter, PixelShuffle, ReLU
from .losses import loss as loss_fn

__all__ = ["RestorerConfig", "TrainBatch", "Restorer", "forward", "compute_gradients"]


@dataclass(frozen=True)
class RestorerConfig:
    """Architecture of the restorer.

    The full-scale configuration (10 groups, 10 blocks, 64 channels) is
    constructible; the defaults here are the desk-scale setup that trains
    in minutes on a CPU.
    """

    groups: int = 2
    blocks_per_group: int = 2
    feature_channels: int = 16
    attention_reduction: int = 4
    scale: int = 2
    use_distance_head: bool = True
    body_kernel: int = 3
    dist_kernel: int = 7
    dtype: str = "float64"
    mean_shift: float = 128.0

    def __post_init__(self):
        if self.scale not in (2, 4):
            raise ValueError("scale must be 2 or 4")
        if self.feature_channels % self.attention_reduction != 0:
            raise ValueError("feature_channels must be divisible by attention_reduction")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RestorerConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class TrainBatch:
    """One optimizer step's worth of aligned patches.

    ``inputs`` is (B, 3, h, w); ``targets`` is (B, 3, h*scale, w*scale);
    ``distances`` is (B, 1, h, w) aligned to the inputs, or None when the
    distance head is unused.
    """

    inputs: np.ndarray
    targets: np.ndarray
    distances: np.ndarray | None = None

    def __post_init__(self):
        if self.inputs.ndim != 4 or self.targets.ndim != 4:
            raise ShapeMismatchError("inputs and targets must be 4-D batches")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ShapeMismatchError("batch sizes differ")
        th, tw = self.targets.shape[2:]
        ih, iw = self.inputs.shape[2:]
        if th % ih != 0 or tw % iw != 0 or th // ih != tw // iw:
            raise ShapeMismatchError("target dims must be an integer multiple of input dims")
        if self.distances is not None and self.distances.shape != (
            self.inputs.shape[0], 1, ih, iw,
        ):
            raise ShapeMismatchError("distance patches must align with input patches")

    @property
    def scale(self) -> int:
        return self.targets.shape[2] // self.inputs.shape[2]


class _Rcab:
    """conv -> ReLU -> conv -> channel attention, with a residual add."""

    def __init__(self, c: int, k: int, reduction: int, rng, name: str, dtype):
        self.conv1 = Conv2d(c, c, k, rng, f"{name}.conv1", dtype)
        self.relu = ReLU()
        self.conv2 = Conv2d(c, c, k, rng, f"{name}.conv2", dtype)
        self.ca = ChannelAttention(c, reduction, rng, f"{name}.ca", dtype)

    def parameters(self):
        return self.conv1.parameters() + self.conv2.parameters() + self.ca.parameters()

    def forward(self, x):
        f = self.conv2.forward(self.relu.forward(self.conv1.forward(x)))
        return x + self.ca.forward(f)

    def backward(self, gy):
        gf = self.ca.backward(gy)
        gx = self.conv1.backward(self.relu.backward(self.conv2.backward(gf)))
        return gy + gx


class _ResidualGroup:
    """A chain of RCABs plus a tail conv, wrapped in a residual add."""

    def __init__(self, c: int, k: int, n_blocks: int, reduction: int, rng, name: str, dtype):
        self.blocks = [
            _Rcab(c, k, reduction, rng, f"{name}.rcab{i}", dtype) for i in range(n_blocks)
        ]
        self.tail = Conv2d(c, c, k, rng, f"{name}.tail", dtype)

    def parameters(self):
        out = []
        for blk in self.blocks:
            out += blk.parameters()
        return out + self.tail.parameters()

    def forward(self, x):
        t = x
        for blk in self.blocks:
            t = blk.forward(t)
        return x + self.tail.forward(t)

    def backward(self, gy):
        gt = self.tail.backward(gy)
        for blk in reversed(self.blocks):
            gt = blk.backward(gt)
        return gy + gt


class Restorer:
    """Desk-scale channel-attention restorer with an optional distance head."""

    def __init__(self, config: RestorerConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        dtype = np.dtype(config.dtype).type
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        c = config.feature_channels
        k = config.body_kernel
        self.head = Conv2d(3, c, k, rng, "head", dtype)
        if config.use_distance_head:
            dk = config.dist_kernel
            self.dist_convs = [
                Conv2d(1, c, dk, rng, "dist.conv0", dtype),
                Conv2d(c, c, dk, rng, "dist.conv1", dtype),
                Conv2d(c, c, dk, rng, "dist.conv2", dtype),
            ]
            self.dist_relus = [ReLU(), ReLU()]
        else:
            self.dist_convs = []
            self.dist_relus = []
        self.groups = [
            _ResidualGroup(c, k, config.blocks_per_group, config.attention_reduction,
                           rng, f"group{g}", dtype)
            for g in range(config.groups)
        ]
        self.conv_lsc = Conv2d(c, c, k, rng, "lsc", dtype)
        self.up_stages = []
        for s in range(config.scale // 2):
            self.up_stages.append(
                (Conv2d(c, 4 * c, k, rng, f"up{s}", dtype), PixelShuffle(2))
            )
        self.conv_out = Conv2d(c, 3, k, rng, "out", dtype)

    # -- parameter plumbing -------------------------------------------------

    def parameters(self) -> list[Parameter]:
        out = self.head.parameters()
        for conv in self.dist_convs:
            out += conv.parameters()
        for grp in self.groups:
            out += grp.parameters()
        out += self.conv_lsc.parameters()
        for conv, _ in self.up_stages:
            out += conv.parameters()
        out += self.conv_out.parameters()
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(p.name, p.value) for p in self.parameters()]

    # -- forward / backward -------------------------------------------------

    def _dist_features(self, dist: np.ndarray) -> np.ndarray:
        t = self.dist_convs[0].forward(dist)
        t = self.dist_relus[0].forward(t)
        t = self.dist_convs[1].forward(t)
        t = self.dist_relus[1].forward(t)
        return self.dist_convs[2].forward(t)

    def forward(self, x: np.ndarray, dist: np.ndarray | None = None) -> np.ndarray:
        """Batched forward pass: (B, 3, h, w) -> (B, 3, h*scale, w*scale).

        The fixed mean shift centers the all-positive digital-unit inputs
        before the first convolution and restores the offset at the output
        (as in the restorer design this follows); without it the random
        zero-bias head drives most ReLU units dead.
        """
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeMismatchError(f"expected (B, 3, h, w) input, got {x.shape}")
        x = x - self.config.mean_shift
        if self.config.use_distance_head:
            if dist is None:
                raise MissingDistanceError(
                    "this restorer was built with a distance head; pass dist"
                )
            if dist.shape != (x.shape[0], 1, x.shape[2], x.shape[3]):
                raise ShapeMismatchError("distance batch must be (B, 1, h, w)")
            f0 = self.head.forward(x) + self._dist_features(dist)
        else:
            f0 = self.head.forward(x)
        t = f0
        for grp in self.groups:
            t = grp.forward(t)
        fdf = f0 + self.conv_lsc.forward(t)
        u = fdf
        for conv, shuffle in self.up_stages:
            u = shuffle.forward(conv.forward(u))
        return self.conv_out.forward(u) + self.config.mean_shift

    def backward(self, gy: np.ndarray) -> None:
        """Accumulate parameter gradients for the most recent forward pass."""
        gu = self.conv_out.backward(gy)
        for conv, shuffle in reversed(self.up_stages):
            gu = conv.backward(shuffle.backward(gu))
        gf0 = gu  # gradient reaching F0 via the long skip
        gt = self.conv_lsc.backward(gu)
        for grp in reversed(self.groups):
            gt = grp.backward(gt)
        gf0 = gf0 + gt
        self.head.backward(gf0)
        if self.config.use_distance_head:
            g = self.dist_convs[2].backward(gf0)
            g = self.dist_relus[1].backward(g)
            g = self.dist_convs[1].backward(g)
            g = self.dist_relus[0].backward(g)
            self.dist_convs[0].backward(g)


def forward(
    model: Restorer,
    image: RasterImage,
    dist: DistanceMatrix | None = None,
) -> RasterImage:
    """Run the restorer on one image; output pitch shrinks by the scale."""
    x = image.values[None].astype(model.head.w.value.dtype)
    d = None
    if dist is not None:
        d = dist.values[None, None].astype(x.dtype)
    y = model.forward(x, d)
    return RasterImage(y[0].astype(float), image.pitch / model.config.scale)


def compute_gradients(model: Restorer, batch: TrainBatch, loss_kind: str,
                      charbonnier_eps: float = 4.0):
    """Loss value and fresh parameter gradients for one batch.

    Zeroes the gradient buffers, runs forward and backward, and validates
    every gradient is finite (raising NonFiniteGradientError naming the
    offending parameter otherwise).
    """
    if batch.scale != model.config.scale:
        raise ShapeMismatchError(
            f"batch scale {batch.scale} != model scale {model.config.scale}"
        )
    model.zero_grad()
    y_hat = model.forward(batch.inputs, batch.distances)
    value, grad = loss_fn(loss_kind, batch.targets, y_hat, charbonnier_eps)
    model.backward(grad)
    for p in model.parameters():
        if not np.isfinite(p.grad).all():
            raise NonFiniteGradientError(f"non-finite gradient in {p.name}")
    return value, {p.name: p.grad for p in model.parameters()}
