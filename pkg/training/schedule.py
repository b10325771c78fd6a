"""Step learning-rate schedule: lr0 * decay ** floor(epoch / decay_every)."""

from training.config import TrainConfig
from util.errors_util import ConfigError


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return config.lr0 * config.lr_decay ** (epoch // config.lr_decay_every)
