"""
===============================================================================
SCENE BATCHES - AGENT-CENTRIC COLLATION
===============================================================================

Purpose:
    collate() turns a list of Scenes into stacked arrays in each main agent's
    own frame (heading_transform of its observed window):

      observed        [B, T_obs, 2]
      neighbors       [B, N, T_obs, 2]    N = max neighbor count in the batch
      neighbor_mask   [B, N, T_obs]       False for padding rows / unseen steps
      future          [B, T_pred, 2]      only when every scene carries one
      crops           [B, s, s, 3]        patch backbone only, intensities / 255

Notes:
    - The future never influences anything else in the batch; inference runs
      may drop it entirely (include_future=False).
    - Crops use DataConfig.crop_sizes_by_class as the source side per class and
      are resampled onto the model's crop_size grid.

===============================================================================
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from data.trajectory import Scene
from model.config import ModelConfig
from util.errors_util import ContractError
from util.image_util import rotate_crop
from util.transform_util import RigidTransform2D, apply_transform, heading_transform

PIXEL_SCALE = 255.0


@dataclass
class SceneBatch:
    scene_ids: List[str]
    observed: np.ndarray
    neighbors: np.ndarray
    neighbor_mask: np.ndarray
    transforms: List[RigidTransform2D]
    units: List[str]
    future: Optional[np.ndarray] = None
    crops: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.scene_ids)

    @property
    def max_neighbors(self) -> int:
        return self.neighbors.shape[1]


def collate(
    scenes: Sequence[Scene],
    config: ModelConfig,
    *,
    dtype=np.float64,
    include_future: bool = True,
    sampling: str = "bilinear",
    crop_sizes: Optional[Dict[str, int]] = None,
) -> SceneBatch:
    if not scenes:
        raise ContractError("cannot collate an empty scene list")
    crop_sizes = crop_sizes or {}
    b = len(scenes)
    n_max = max(len(s.neighbors) for s in scenes)

    observed = np.zeros((b, config.t_obs, 2))
    neighbors = np.zeros((b, n_max, config.t_obs, 2))
    neighbor_mask = np.zeros((b, n_max, config.t_obs), dtype=bool)
    has_future = include_future and all(s.future is not None for s in scenes)
    future = np.zeros((b, config.t_pred, 2)) if has_future else None
    crops = np.zeros((b, config.crop_size, config.crop_size, 3)) if config.image_enabled else None
    transforms = []

    for i, scene in enumerate(scenes):
        if scene.t_obs != config.t_obs or scene.t_pred != config.t_pred:
            raise ContractError(
                f"scene {scene.scene_id} horizon {scene.t_obs}/{scene.t_pred} "
                f"!= model {config.t_obs}/{config.t_pred}"
            )
        t = heading_transform(scene.observed)
        transforms.append(t)
        observed[i] = apply_transform(t, scene.observed, "agent").points
        for j, neighbor in enumerate(scene.neighbors):
            neighbors[i, j] = apply_transform(t, neighbor, "agent").points
            neighbor_mask[i, j] = neighbor.mask
        if future is not None:
            future[i] = apply_transform(t, scene.future, "agent").points
        if crops is not None:
            if scene.image is None:
                raise ContractError(f"scene {scene.scene_id} has no BEV image (patch backbone)")
            side = crop_sizes.get(scene.label, config.crop_size)
            crop = rotate_crop(scene.image, t, side, sampling=sampling, out_size=config.crop_size)
            crops[i] = crop.pixels / PIXEL_SCALE

    return SceneBatch(
        scene_ids=[s.scene_id for s in scenes],
        observed=observed.astype(dtype),
        neighbors=neighbors.astype(dtype),
        neighbor_mask=neighbor_mask,
        transforms=transforms,
        units=[s.units for s in scenes],
        future=None if future is None else future.astype(dtype),
        crops=None if crops is None else crops.astype(dtype),
    )
