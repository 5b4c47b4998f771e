"""Training configuration with desk-scale defaults.

Paper-scale settings (256x256 inputs, batch 128, width 64, eval every
200 batches on 16 samples) are reachable by overriding the same fields;
nothing here is hard-coded to the toy scale. The loss weights mirror
the evaluation toolkit's config value for value.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class TrainConfig:
    image_size: int = 64
    in_channels: int = 3
    out_channels: int = 3
    gen_width: int = 32
    disc_width: int = 32
    dropout: float = 0.5
    leaky_slope: float = 0.2
    lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 16
    epochs: int = 20
    recon_weight: float = 100.0
    l2_fraction: float = 0.3
    disc_scale: float = 0.5
    ssim_window: int = 11
    eval_every: int = 200
    eval_samples: int = 16
    dump_every: int = 0
    real_label_is_zero: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.image_size < 16 or self.image_size & (self.image_size - 1):
            raise ValueError(
                f"image_size must be a power of two >= 16, got {self.image_size}"
            )
        if not 0.0 <= self.l2_fraction <= 1.0:
            raise ValueError("l2_fraction must lie in [0, 1]")
        if self.recon_weight < 0 or self.disc_scale <= 0:
            raise ValueError("bad loss weights")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


def load_config(path=None, **overrides) -> TrainConfig:
    """TOML [train] section, with keyword overrides on top."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path, "rb") as fh:
            values.update(tomllib.load(fh).get("train", {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)
