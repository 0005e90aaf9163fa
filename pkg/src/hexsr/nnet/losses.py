"""Training losses: MSE, L1, and Charbonnier, with analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError

__all__ = ["loss", "LOSS_KINDS"]

LOSS_KINDS = ("mse", "l1", "charbonnier")


def loss(kind: str, y: np.ndarray, y_hat: np.ndarray, eps: float = 4.0):
    """Mean penalty between target ``y`` and estimate ``y_hat``.

    Returns ``(value, grad)`` where ``grad`` is the gradient with respect
    to ``y_hat``.  Charbonnier is mean(sqrt(e^2 + eps^2) - eps): smooth
    near zero like MSE, asymptotically linear like L1; ``eps = 4`` works
    well for images in the 0 to 255 range.
    """
    if y.shape != y_hat.shape:
        raise ShapeMismatchError(f"target {y.shape} vs estimate {y_hat.shape}")
    n = y.size
    e = y_hat - y
    if kind == "mse":
        return float(np.mean(e * e)), (2.0 / n) * e
    if kind == "l1":
        return float(np.mean(np.abs(e))), np.sign(e) / n
    if kind == "charbonnier":
        if eps <= 0:
            raise ValueError("charbonnier eps must be positive")
        root = np.sqrt(e * e + eps * eps)
        return float(np.mean(root - eps)), e / (root * n)
    raise ValueError(f"unknown loss kind {kind!r}; choose from {LOSS_KINDS}")
