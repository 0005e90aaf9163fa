"""Training loop: Adam updates, stepped learning-rate halving, best-validation
checkpoint selection, and deterministic patch sampling.

Checkpoint container: a UTF-8 text header (magic ``HEXSR-CKPT 1``, config
JSON, step, seed, one ``param:`` line per tensor in blob order) terminated
by an ``end`` line, followed by the raw little-endian float64 (or float32)
parameter values concatenated in the declared order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, EmptyTrainingSetError, NonFiniteGradientError
from ..metrics import psnr, to_luma
from ..observe import RasterImage
from .model import Restorer, RestorerConfig, TrainBatch, compute_gradients

__all__ = ["TrainSample", "TrainResult", "train", "save_checkpoint", "load_checkpoint",
           "export_curve_csv"]

CKPT_MAGIC = "HEXSR-CKPT 1"


@dataclass(frozen=True)
class TrainSample:
    """One training image: network input, aligned distance plane, HR target."""

    inputs: np.ndarray            # (3, h, w)
    target: np.ndarray            # (3, h*scale, w*scale)
    distance: np.ndarray | None = None   # (1, h, w)


@dataclass
class TrainResult:
    model: Restorer
    curve: list[tuple[int, float, float, float]]   # (step, lr, train_loss, val_psnr_y)
    best_step: int
    best_val_psnr: float


class _Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0

    def step(self, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * p.grad
            v *= b2
            v += (1.0 - b2) * p.grad * p.grad
            p.value -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _lr_at(step: int, lr0: float, milestones) -> float:
    halvings = sum(1 for m in milestones if step >= m)
    return lr0 * (0.5**halvings)


def _sample_batch(samples, rng, batch_size: int, patch: int, scale: int) -> TrainBatch:
    use_dist = samples[0].distance is not None
    xs, ds, ys = [], [], []
    for _ in range(batch_size):
        s = samples[int(rng.integers(len(samples)))]
        _, h, w = s.inputs.shape
        if h < patch or w < patch:
            raise ValueError(f"training image {h}x{w} smaller than patch {patch}")
        top = int(rng.integers(h - patch + 1))
        left = int(rng.integers(w - patch + 1))
        xs.append(s.inputs[:, top : top + patch, left : left + patch])
        if use_dist:
            ds.append(s.distance[:, top : top + patch, left : left + patch])
        ys.append(
            s.target[:, scale * top : scale * (top + patch), scale * left : scale * (left + patch)]
        )
    return TrainBatch(
        inputs=np.stack(xs),
        targets=np.stack(ys),
        distances=np.stack(ds) if use_dist else None,
    )


def _val_psnr_y(model: Restorer, val_samples, shave: int = 6) -> float:
    scores = []
    dtype = model.head.w.value.dtype
    for s in val_samples:
        d = None if s.distance is None else s.distance[None].astype(dtype)
        y = model.forward(s.inputs[None].astype(dtype), d)[0]
        est = RasterImage(np.asarray(y, dtype=float), 1.0)
        ref = RasterImage(np.asarray(s.target, dtype=float), 1.0)
        scores.append(psnr(to_luma(est), to_luma(ref), shave=shave))
    finite = [s for s in scores if np.isfinite(s)]
    return float(np.mean(finite)) if finite else float("inf")


def train(
    config: RestorerConfig,
    train_samples: list[TrainSample],
    val_samples: list[TrainSample],
    *,
    steps: int = 2000,
    batch_size: int = 16,
    patch: int = 96,
    lr: float = 1e-4,
    betas: tuple[float, float] = (0.9, 0.999),
    adam_eps: float = 1e-8,
    milestones: tuple[int, ...] = (),
    loss_kind: str = "charbonnier",
    charbonnier_eps: float = 4.0,
    seed: int = 0,
    val_interval: int = 100,
    model: Restorer | None = None,
) -> TrainResult:
    """Train a restorer with Adam; returns the best-validation parameters.

    Deterministic given ``seed``: model initialization and the patch
    shuffling stream are both Philox generators keyed by it.  The learning
    rate halves at each milestone step.  The checkpoint with the best
    validation PSNR on the luma channel is restored before returning.
    """
    if not train_samples:
        raise EmptyTrainingSetError("training set is empty")
    if model is None:
        model = Restorer(config, seed=seed)
    sample_rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(1,)))
    )
    opt = _Adam(model.parameters(), betas[0], betas[1], adam_eps)
    curve: list[tuple[int, float, float, float]] = []
    best_psnr = -np.inf
    best_step = 0
    best_state = [p.value.copy() for p in model.parameters()]
    running = 0.0
    count = 0
    for step in range(1, steps + 1):
        batch = _sample_batch(train_samples, sample_rng, batch_size, patch, config.scale)
        try:
            value, _ = compute_gradients(model, batch, loss_kind, charbonnier_eps)
        except NonFiniteGradientError as exc:
            raise DivergenceError(f"training diverged at step {step}: {exc}") from exc
        if not np.isfinite(value):
            raise DivergenceError(f"loss became non-finite at step {step}")
        lr_now = _lr_at(step, lr, milestones)
        opt.step(lr_now)
        running += value
        count += 1
        if step % val_interval == 0 or step == steps:
            vp = _val_psnr_y(model, val_samples) if val_samples else float("nan")
            curve.append((step, lr_now, running / count, vp))
            running = 0.0
            count = 0
            if val_samples and vp > best_psnr:
                best_psnr = vp
                best_step = step
                best_state = [p.value.copy() for p in model.parameters()]
    if val_samples:
        for p, saved in zip(model.parameters(), best_state):
            p.value[...] = saved
    else:
        best_step = steps
        best_psnr = float("nan")
    return TrainResult(model, curve, best_step, best_psnr)


def save_checkpoint(model: Restorer, path, step: int = 0, extra: dict | None = None) -> None:
    """Serialize config and parameters (text header plus raw blob)."""
    lines = [
        CKPT_MAGIC,
        f"config: {model.config.to_json()}",
        f"seed: {model.seed}",
        f"step: {step}",
        f"dtype: {model.config.dtype}",
    ]
    for k in sorted(extra or {}):
        lines.append(f"{k}: {extra[k]}")
    params = model.parameters()
    for p in params:
        lines.append(f"param: {p.name} {' '.join(str(s) for s in p.value.shape)}")
    lines.append("end")
    code = "<f8" if model.config.dtype == "float64" else "<f4"
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for p in params:
            fh.write(np.ascontiguousarray(p.value, dtype=code).tobytes())


def load_checkpoint(path) -> tuple[Restorer, dict]:
    """Rebuild a restorer from a checkpoint; returns (model, header dict)."""
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.index(b"\nend\n") + len(b"\nend\n")
    text = data[:nl].decode("utf-8").splitlines()
    if text[0] != CKPT_MAGIC:
        raise ValueError(f"not a {CKPT_MAGIC} checkpoint")
    meta: dict[str, str] = {}
    declared: list[tuple[str, tuple[int, ...]]] = []
    for line in text[1:-1]:
        key, _, value = line.partition(": ")
        if key == "param":
            parts = value.split()
            declared.append((parts[0], tuple(int(s) for s in parts[1:])))
        else:
            meta[key] = value
    config = RestorerConfig.from_json(meta["config"])
    model = Restorer(config, seed=int(meta.get("seed", "0")))
    code = "<f8" if config.dtype == "float64" else "<f4"
    blob = np.frombuffer(data[nl:], dtype=code)
    params = model.parameters()
    if len(params) != len(declared):
        raise ValueError("checkpoint parameter list does not match the architecture")
    pos = 0
    for p, (name, shape) in zip(params, declared):
        if p.name != name or p.value.shape != shape:
            raise ValueError(f"checkpoint tensor {name}{shape} does not match {p.name}{p.value.shape}")
        n = int(np.prod(shape)) if shape else 1
        p.value[...] = blob[pos : pos + n].reshape(shape)
        pos += n
    if pos != blob.size:
        raise ValueError("checkpoint blob size mismatch")
    return model, meta


def export_curve_csv(curve, path) -> None:
    """Write the learning curve as CSV (step, lr, train_loss, val_psnr_y)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "lr", "train_loss", "val_psnr_y"])
        for step, lr_now, tl, vp in curve:
            w.writerow([step, f"{lr_now:.9g}", f"{tl:.9g}", f"{vp:.6f}"])
