"""Desk-scale learned restorer: layers, model, losses, and training."""

from .layers import ChannelAttention, Conv2d, Parameter, PixelShuffle, ReLU
from .losses import LOSS_KINDS, loss
from .model import (
    Restorer,
    RestorerConfig,
    TrainBatch,
    compute_gradients,
    forward,
)
from .train import (
    TrainResult,
    TrainSample,
    export_curve_csv,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "ChannelAttention",
    "Conv2d",
    "Parameter",
    "PixelShuffle",
    "ReLU",
    "LOSS_KINDS",
    "loss",
    "Restorer",
    "RestorerConfig",
    "TrainBatch",
    "compute_gradients",
    "forward",
    "TrainResult",
    "TrainSample",
    "export_curve_csv",
    "load_checkpoint",
    "save_checkpoint",
    "train",
]
