"""
DataConfig: data-preparation settings (horizons, SDD filters, crop sampling).
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, Tuple

from data.sdd_parser import DEFAULT_FRAME_STRIDE, SDD_FLAGS, SDD_LABELS
from data.trajectory import DEFAULT_DT, DEFAULT_T_OBS, DEFAULT_T_PRED
from util.errors_util import ConfigError
from util.image_util import SAMPLING_MODES


@dataclass(frozen=True)
class DataConfig:
    t_obs: int = DEFAULT_T_OBS
    t_pred: int = DEFAULT_T_PRED
    dt: float = DEFAULT_DT
    scene_stride: int = 1
    eth_frame_step: int = 0
    sdd_keep_classes: Tuple[str, ...] = ("Pedestrian",)
    sdd_drop_flags: Tuple[str, ...] = ("lost",)
    sdd_frame_stride: int = DEFAULT_FRAME_STRIDE
    meters_per_pixel: float = 1.0
    crop_sizes_by_class: Tuple[Tuple[str, int], ...] = field(default_factory=tuple)
    sampling: str = "bilinear"
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.t_obs < 2 or self.t_pred < 1:
            raise ConfigError(f"t_obs must be >= 2 and t_pred >= 1, got {self.t_obs}/{self.t_pred}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.scene_stride < 1 or self.sdd_frame_stride < 1 or self.eth_frame_step < 0:
            raise ConfigError("strides must be positive (eth_frame_step 0 means infer)")
        bad_classes = sorted(set(self.sdd_keep_classes) - set(SDD_LABELS))
        if bad_classes:
            raise ConfigError(f"unknown SDD classes {bad_classes}")
        bad_flags = sorted(set(self.sdd_drop_flags) - set(SDD_FLAGS))
        if bad_flags:
            raise ConfigError(f"unknown SDD flags {bad_flags}")
        for label, side in self.crop_sizes_by_class:
            if label not in SDD_LABELS or int(side) < 2:
                raise ConfigError(f"bad crop size override {label}:{side}")
        if self.sampling not in SAMPLING_MODES:
            raise ConfigError(f"sampling must be one of {SAMPLING_MODES}, got '{self.sampling}'")
        if not self.meters_per_pixel > 0:
            raise ConfigError(f"meters_per_pixel must be positive, got {self.meters_per_pixel}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")

    @property
    def crop_sizes(self) -> Dict[str, int]:
        return {label: int(side) for label, side in self.crop_sizes_by_class}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sdd_keep_classes"] = list(self.sdd_keep_classes)
        d["sdd_drop_flags"] = list(self.sdd_drop_flags)
        d["crop_sizes_by_class"] = [list(p) for p in self.crop_sizes_by_class]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DataConfig":
        d = dict(d)
        d["sdd_keep_classes"] = tuple(d.get("sdd_keep_classes", ("Pedestrian",)))
        d["sdd_drop_flags"] = tuple(d.get("sdd_drop_flags", ("lost",)))
        d["crop_sizes_by_class"] = tuple(tuple(p) for p in d.get("crop_sizes_by_class", ()))
        return cls(**d)
