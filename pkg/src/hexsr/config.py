"""Experiment configuration and dataset splits.

Configs serialize to deterministic JSON (sorted keys, two-space indent,
trailing newline) with an explicit ``version`` field, so serialize - parse -
serialize is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

__all__ = ["VARIANTS", "DatasetSplit", "TrainSettings", "ExperimentConfig"]

# Declared system order; reports sort by it.
VARIANTS = (
    "HexNI4",
    "RectBic4",
    "HexNI4Wiener",
    "RectBic4Wiener",
    "HexNI2Rcan2",
    "RectBic2Rcan2",
    "Rect4Rcan4",
)

_WIENER_VARIANTS = {"HexNI4Wiener", "RectBic4Wiener"}
_LEARNED_VARIANTS = {"HexNI2Rcan2", "RectBic2Rcan2", "Rect4Rcan4"}
_HEX_VARIANTS = {"HexNI4", "HexNI4Wiener", "HexNI2Rcan2"}


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint id ranges for train/validation/test, inclusive on both ends."""

    train: tuple[int, int] = (1, 800)
    val: tuple[int, int] = (801, 810)
    test: tuple[int, int] = (811, 900)

    def __post_init__(self):
        ids = [self.train_ids(), self.val_ids(), self.test_ids()]
        for a in range(3):
            for b in range(a + 1, 3):
                if set(ids[a]) & set(ids[b]):
                    raise ConfigError("dataset split ranges overlap")

    def train_ids(self) -> list[int]:
        return list(range(self.train[0], self.train[1] + 1))

    def val_ids(self) -> list[int]:
        return list(range(self.val[0], self.val[1] + 1))

    def test_ids(self) -> list[int]:
        return list(range(self.test[0], self.test[1] + 1))


@dataclass(frozen=True)
class TrainSettings:
    """Hyperparameters of the learned restorer's training run."""

    steps: int = 2000
    batch_size: int = 8
    patch: int = 16
    lr: float = 1e-4
    milestones: tuple[int, ...] = (1200, 1600)
    loss: str = "charbonnier"
    charbonnier_eps: float = 4.0
    groups: int = 2
    blocks_per_group: int = 2
    feature_channels: int = 16
    attention_reduction: int = 4
    dtype: str = "float32"
    seed: int = 0
    val_interval: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a pipeline run needs: optics, grids, noise, variant, training.

    Wavelengths are micrometers; pitches micrometers; sigma digital units.
    ``nsr`` holds fitted per-channel Wiener noise-to-signal ratios (required
    by Wiener variants); ``checkpoint`` points at a trained restorer
    (required by learned variants unless training settings are present).
    """

    version: int = 1
    variant: str = "HexNI4"
    hr_pitch: float = 1.0
    lr_pitch: float = 4.0
    t1: float | None = None      # defaults to the density-matched value
    t2: float | None = None      # defaults to sqrt(3)*t1
    wavelengths: dict = field(
        default_factory=lambda: {"red": 0.620, "green": 0.540, "blue": 0.460}
    )
    f_number: float = 4.0
    noise_sigma: float = 1.0
    seed: int = 0
    kernel_size: int = 129
    shave: int = 6
    nsr: dict | None = None
    checkpoint: str | None = None
    train: TrainSettings = field(default_factory=TrainSettings)
    split: DatasetSplit = field(default_factory=DatasetSplit)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.hr_pitch <= 0 or self.lr_pitch <= 0:
            raise ConfigError("pitches must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be nonnegative")
        if set(self.wavelengths) != {"red", "green", "blue"}:
            raise ConfigError("wavelengths must name exactly red, green, blue")
        if self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be odd")

    @property
    def needs_nsr(self) -> bool:
        return self.variant in _WIENER_VARIANTS

    @property
    def needs_model(self) -> bool:
        return self.variant in _LEARNED_VARIANTS

    @property
    def uses_hex(self) -> bool:
        return self.variant in _HEX_VARIANTS

    def validate_runnable(self) -> None:
        """Check variant-specific requirements before processing starts."""
        if self.needs_nsr and not self.nsr:
            raise ConfigError(f"variant {self.variant} requires fitted or provided nsr")
        if self.needs_nsr and self.nsr is not None:
            missing = {"red", "green", "blue"} - set(self.nsr)
            if missing:
                raise ConfigError(f"nsr missing channels: {sorted(missing)}")
        if self.needs_model and not self.checkpoint and self.train is None:
            raise ConfigError(
                f"variant {self.variant} requires a checkpoint or training settings"
            )

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        d = json.loads(text)
        if "train" in d and isinstance(d["train"], dict):
            t = dict(d["train"])
            if "milestones" in t:
                t["milestones"] = tuple(t["milestones"])
            d["train"] = TrainSettings(**t)
        if "split" in d and isinstance(d["split"], dict):
            s = {k: tuple(v) for k, v in d["split"].items()}
            d["split"] = DatasetSplit(**s)
        for key in ("t1", "t2"):
            if key in d and d[key] is not None:
                d[key] = float(d[key])
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())
