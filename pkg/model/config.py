"""
===============================================================================
MODEL CONFIG
===============================================================================

Defaults reproduce the published architecture:

    latent 12 x 48, 4 encoder blocks, 8 heads
    pose MLP 2 -> 8 -> 32, temporal encoding 16   (32 + 16 == d_model)
    goal MLP 576 -> 256 -> 64 -> 2                 (576 == 12 * 48)
    trajectory MLP 50 -> 256 -> 64 -> 24           (50 == 48 + 2, 24 == 2 * 12)
    latent feed-forward width 4 * d_model

backbone:
    "nomap"  agent + neighbor cross-attentions
    "patch"  adds an image cross-attention over linearly embedded patches of an
             agent-centric crop (crop_size x crop_size, patch_size x patch_size)

===============================================================================
"""

from dataclasses import asdict, dataclass
from typing import Tuple

from util.errors_util import ConfigError

BACKBONES = ("nomap", "patch")


@dataclass(frozen=True)
class ModelConfig:
    t_obs: int = 8
    t_pred: int = 12
    n_blocks: int = 4
    heads: int = 8
    d_model: int = 48
    latent_len: int = 12
    pe_dim: int = 16
    pose_mlp: Tuple[int, ...] = (2, 8, 32)
    goal_mlp: Tuple[int, ...] = (576, 256, 64, 2)
    traj_mlp: Tuple[int, ...] = (50, 256, 64, 24)
    ff_mult: int = 4
    backbone: str = "nomap"
    crop_size: int = 64
    patch_size: int = 8
    tie_blocks: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pose_mlp", tuple(int(w) for w in self.pose_mlp))
        object.__setattr__(self, "goal_mlp", tuple(int(w) for w in self.goal_mlp))
        object.__setattr__(self, "traj_mlp", tuple(int(w) for w in self.traj_mlp))

        if self.backbone not in BACKBONES:
            raise ConfigError(f"backbone must be one of {BACKBONES}, got '{self.backbone}'")
        if self.t_obs < 2 or self.t_pred < 1:
            raise ConfigError(f"t_obs must be >= 2 and t_pred >= 1, got {self.t_obs}/{self.t_pred}")
        if self.n_blocks < 0 or self.latent_len < 1 or self.ff_mult < 1:
            raise ConfigError("n_blocks >= 0, latent_len >= 1 and ff_mult >= 1 required")
        if self.heads < 1 or self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.heads} heads")
        if self.pe_dim < 2 or self.pe_dim % 2:
            raise ConfigError(f"pe_dim must be even and >= 2, got {self.pe_dim}")
        for name in ("pose_mlp", "goal_mlp", "traj_mlp"):
            widths = getattr(self, name)
            if len(widths) < 2 or any(w < 1 for w in widths):
                raise ConfigError(f"{name} needs >= 2 positive widths, got {widths}")
        if self.pose_mlp[0] != 2:
            raise ConfigError(f"pose_mlp input must be 2, got {self.pose_mlp[0]}")
        if self.pose_mlp[-1] + self.pe_dim != self.d_model:
            raise ConfigError(
                f"pose embedding {self.pose_mlp[-1]} + pe_dim {self.pe_dim} != d_model {self.d_model}"
            )
        if self.goal_mlp[0] != self.latent_len * self.d_model or self.goal_mlp[-1] != 2:
            raise ConfigError(
                f"goal_mlp must map {self.latent_len * self.d_model} -> 2, got {self.goal_mlp}"
            )
        if self.traj_mlp[0] != self.d_model + 2 or self.traj_mlp[-1] != 2 * self.t_pred:
            raise ConfigError(
                f"traj_mlp must map {self.d_model + 2} -> {2 * self.t_pred}, got {self.traj_mlp}"
            )
        if self.image_enabled:
            if self.patch_size < 1 or self.crop_size % self.patch_size:
                raise ConfigError(
                    f"crop_size {self.crop_size} is not divisible by patch_size {self.patch_size}"
                )

    @property
    def image_enabled(self) -> bool:
        return self.backbone == "patch"

    @property
    def pose_dim(self) -> int:
        return self.pose_mlp[-1]

    @property
    def ff_dim(self) -> int:
        return self.ff_mult * self.d_model

    @property
    def patch_count(self) -> int:
        return (self.crop_size // self.patch_size) ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("pose_mlp", "goal_mlp", "traj_mlp"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown model config keys {unknown}")
        return cls(**d)

    @classmethod
    def small(cls, **overrides) -> "ModelConfig":
        """Reduced widths for fast tests; same wiring as the default."""
        base = dict(
            n_blocks=2,
            heads=2,
            d_model=12,
            latent_len=4,
            pe_dim=4,
            pose_mlp=(2, 6, 8),
            goal_mlp=(48, 16, 2),
            traj_mlp=(14, 16, 24),
            ff_mult=2,
            crop_size=16,
            patch_size=8,
        )
        base.update(overrides)
        return cls(**base)
