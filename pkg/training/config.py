"""
TrainConfig: optimizer, schedule and loop settings.

Defaults: batch 32, Adam lr 5e-4 decayed by 0.2 every 30 epochs, 65 epochs,
goal-term weight lambda 0.5, 10% of training scenes held out for checkpoint
selection.
"""

from dataclasses import asdict, dataclass

from numerics.ops_util import PRECISIONS
from util.errors_util import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    lr0: float = 5e-4
    lr_decay: float = 0.2
    lr_decay_every: int = 30
    epochs: int = 65
    lam: float = 0.5
    seed: int = 0
    precision: str = "fast"
    validation_fraction: float = 0.1
    prefetch: int = 2

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if not self.lr0 > 0 or not 0 < self.lr_decay <= 1 or self.lr_decay_every < 1:
            raise ConfigError(
                f"bad schedule lr0={self.lr0} decay={self.lr_decay} every={self.lr_decay_every}"
            )
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.lam < 0:
            raise ConfigError(f"lam must be >= 0, got {self.lam}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {sorted(PRECISIONS)}, got '{self.precision}'")
        if not 0 <= self.validation_fraction < 1:
            raise ConfigError(f"validation_fraction must be in [0, 1), got {self.validation_fraction}")
        if self.prefetch < 1:
            raise ConfigError(f"prefetch queue size must be >= 1, got {self.prefetch}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown train config keys {unknown}")
        return cls(**d)

    @classmethod
    def overfit(cls, **overrides) -> "TrainConfig":
        """
        Settings for memorizing a handful of scenes: one scene per Adam step,
        lr halved every 75 of 500 epochs, no validation holdout.
        """
        base = dict(
            batch_size=1,
            lr0=1e-3,
            lr_decay=0.5,
            lr_decay_every=75,
            epochs=500,
            validation_fraction=0.0,
        )
        base.update(overrides)
        return cls(**base)
