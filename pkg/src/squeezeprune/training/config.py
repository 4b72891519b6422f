from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TrainConfig:
    batch_size: int = 128
    initial_lr: float = 0.01
    lr_ladder: list[float] = field(default_factory=lambda: [0.005, 0.001, 0.0001])
    plateau_patience: int = 3
    plateau_min_delta: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    max_epochs: int = 30
    seed: int = 0
    val_fraction: float = 0.02
    min_images_per_class: int = 70

    def __post_init__(self):
        lrs = [self.initial_lr, *self.lr_ladder]
        if any(b >= a for a, b in zip(lrs, lrs[1:])):
            raise ValueError(f"learning-rate ladder must be strictly decreasing: {lrs}")
        if not 0 < self.val_fraction < 1:
            raise ValueError(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.plateau_patience < 1:
            raise ValueError("batch_size, max_epochs and plateau_patience must be >= 1")
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be positive")
