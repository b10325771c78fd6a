"""
===============================================================================
TRAJECTORY PREDICTOR - FULL FORWARD / BACKWARD
===============================================================================

Purpose:
    Wires embedding, encoder and decoders into one model over SceneBatches:

      1) agent tokens    = embed(observed)                       [B, T_obs, d]
      2) neighbor tokens = [null_token] ++ embed(neighbors)       [B, 1 + N*T_obs, d]
      3) image tokens    = proj(patches(crop)) + pos              [B, P, d]   (patch backbone)
      4) z               = Encoder(latent, contexts)              [B, latent_len, d]
      5) goal            = GoalDecoder(z)                         [B, 2]
      6) trajectory      = TrajectoryDecoder(z, condition)        [B, T_pred, 2]
         condition = ground-truth endpoint ("teacher_forced") or goal ("inference")

Null-token rule:
    The null token is always the first neighbor key. It is masked out when the
    scene has at least one valid neighbor step, and is the only visible key
    otherwise, so attention stays defined for scenes without neighbors.

Notes:
    - Inference never reads batch.future.
    - Predictions are in the agent-centric frame; Prediction carries the
      world -> agent transform for world-frame reporting.

===============================================================================
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from data.trajectory import Scene
from model.batch import SceneBatch, collate
from model.config import ModelConfig
from model.decoders import GoalDecoder, TrajectoryDecoder
from model.embedding import TokenEmbedder
from model.encoder import Encoder
from model.params import expected_shapes
from numerics.ops_util import LinearLayer
from numerics.params_util import ModelParams
from util.errors_util import ConfigError, ContractError
from util.image_util import patchify
from util.transform_util import RigidTransform2D, invert, transform_points

MODES = ("teacher_forced", "inference")


@dataclass
class Prediction:
    goal: np.ndarray
    trajectory: np.ndarray
    transform: RigidTransform2D
    mode: str = "inference"
    scene_id: str = ""
    units: str = "meters"
    frame: str = "agent"

    def world_goal(self) -> np.ndarray:
        return transform_points(invert(self.transform), self.goal)

    def world_trajectory(self) -> np.ndarray:
        return transform_points(invert(self.transform), self.trajectory)


@dataclass
class ForwardCache:
    mode: str
    batch_size: int
    n_neighbors: int
    agent_cache: object
    neighbor_cache: object
    image_cache: object
    encoder_cache: object
    goal_cache: object
    traj_cache: object


def check_param_shapes(params: ModelParams, config: ModelConfig) -> None:
    expected = expected_shapes(config)
    actual = params.shapes()
    if list(expected) != list(actual):
        missing = sorted(set(expected) - set(actual))
        extra = sorted(set(actual) - set(expected))
        raise ConfigError(
            f"parameters do not match the model config (missing {missing[:3]}, unexpected {extra[:3]})"
        )
    for name, shape in expected.items():
        if actual[name] != shape:
            raise ConfigError(f"parameter '{name}' has shape {actual[name]}, config expects {shape}")


class TrajectoryPredictor:
    def __init__(self, config: ModelConfig, params: ModelParams):
        check_param_shapes(params, config)
        self.config = config
        self.params = params
        self.embedder = TokenEmbedder.from_params(params, config)
        self.null_token = params["null_token"]
        self.encoder = Encoder.from_params(params, config)
        self.goal_decoder = GoalDecoder.from_params(params, config)
        self.traj_decoder = TrajectoryDecoder.from_params(params, config)
        self.image_proj = None
        self.image_pos = None
        if config.image_enabled:
            self.image_proj = LinearLayer(params["image.proj.W"], params["image.proj.b"])
            self.image_pos = params["image.pos"]

    @property
    def dtype(self):
        return self.params.dtype

    # -------------------------------------------------------------------------
    # forward
    # -------------------------------------------------------------------------
    def _neighbor_context(self, batch: SceneBatch):
        b, n, t = batch.neighbor_mask.shape
        tokens, cache = self.embedder.forward(batch.neighbors)
        d = tokens.shape[-1]
        flat = tokens.reshape(b, n * t, d)
        mask = batch.neighbor_mask.reshape(b, n * t)
        null = np.broadcast_to(self.null_token.tensor, (b, 1, d))
        null_visible = ~mask.any(axis=1)
        kv = np.concatenate([null, flat], axis=1)
        key_mask = np.concatenate([null_visible[:, None], mask], axis=1)
        return (kv, key_mask), cache

    def _image_context(self, batch: SceneBatch):
        if batch.crops is None:
            raise ContractError("patch backbone needs crops in the batch")
        patched = patchify(batch.crops, self.config.patch_size, self.image_proj)
        return (patched.tokens + self.image_pos.tensor, None), patched.cache

    def forward_batch(self, batch: SceneBatch, mode: str = "inference"):
        """Return (goal [B, 2], trajectory [B, T_pred, 2], ForwardCache)."""
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{mode}'")
        if mode == "teacher_forced" and batch.future is None:
            raise ContractError("teacher-forced forward needs the ground-truth future")

        agent_tokens, agent_cache = self.embedder.forward(batch.observed)
        contexts = {"agent": (agent_tokens, None)}
        contexts["neighbor"], neighbor_cache = self._neighbor_context(batch)
        image_cache = None
        if self.config.image_enabled:
            contexts["image"], image_cache = self._image_context(batch)

        z, encoder_cache = self.encoder.forward(len(batch), contexts)
        goal, goal_cache = self.goal_decoder.forward(z)
        condition = batch.future[:, -1, :] if mode == "teacher_forced" else goal
        traj, traj_cache = self.traj_decoder.forward(z, condition)

        cache = ForwardCache(
            mode=mode,
            batch_size=len(batch),
            n_neighbors=batch.max_neighbors,
            agent_cache=agent_cache,
            neighbor_cache=neighbor_cache,
            image_cache=image_cache,
            encoder_cache=encoder_cache,
            goal_cache=goal_cache,
            traj_cache=traj_cache,
        )
        return goal, traj, cache

    def encode_batch(self, batch: SceneBatch) -> np.ndarray:
        agent_tokens, _ = self.embedder.forward(batch.observed)
        contexts = {"agent": (agent_tokens, None)}
        contexts["neighbor"], _ = self._neighbor_context(batch)
        if self.config.image_enabled:
            contexts["image"], _ = self._image_context(batch)
        return self.encoder.forward(len(batch), contexts)[0]

    # -------------------------------------------------------------------------
    # backward
    # -------------------------------------------------------------------------
    def backward(self, d_goal: np.ndarray, d_traj: np.ndarray, cache: ForwardCache) -> None:
        """Accumulate parameter gradients for upstream gradients on goal and trajectory."""
        dz_traj, d_condition = self.traj_decoder.backward(d_traj, cache.traj_cache)
        if cache.mode == "inference":
            d_goal = d_goal + d_condition
        dz = dz_traj + self.goal_decoder.backward(d_goal, cache.goal_cache)
        d_contexts = self.encoder.backward(dz, cache.encoder_cache)

        # contexts no block attended to (n_blocks == 0) carry no gradient
        if "agent" in d_contexts:
            self.embedder.backward(d_contexts["agent"], cache.agent_cache)

        d_neighbor = d_contexts.get("neighbor")
        if d_neighbor is not None:
            self.null_token.grad += d_neighbor[:, :1, :].sum(axis=0)
            b, n, t = cache.batch_size, cache.n_neighbors, self.config.t_obs
            d_tokens = d_neighbor[:, 1:, :].reshape(b, n, t, d_neighbor.shape[-1])
            self.embedder.backward(d_tokens, cache.neighbor_cache)

        d_image = d_contexts.get("image")
        if self.config.image_enabled and d_image is not None:
            self.image_pos.grad += d_image.sum(axis=0)
            self.image_proj.backward(d_image, cache.image_cache)

    # -------------------------------------------------------------------------
    # scene-level helpers
    # -------------------------------------------------------------------------
    def collate(self, scenes: Sequence[Scene], *, include_future: bool = True, **kwargs) -> SceneBatch:
        return collate(scenes, self.config, dtype=self.dtype, include_future=include_future, **kwargs)

    def predict(
        self,
        scenes: Sequence[Scene],
        mode: str = "inference",
        *,
        batch_size: int = 32,
        **collate_kwargs,
    ) -> List[Prediction]:
        predictions = []
        for start in range(0, len(scenes), batch_size):
            chunk = list(scenes[start:start + batch_size])
            batch = self.collate(chunk, include_future=(mode == "teacher_forced"), **collate_kwargs)
            goal, traj, _ = self.forward_batch(batch, mode)
            for i, scene in enumerate(chunk):
                predictions.append(
                    Prediction(
                        goal=goal[i].astype(np.float64),
                        trajectory=traj[i].astype(np.float64),
                        transform=batch.transforms[i],
                        mode=mode,
                        scene_id=scene.scene_id,
                        units=scene.units,
                    )
                )
        return predictions


def encode(scene: Scene, params: ModelParams, config: ModelConfig) -> np.ndarray:
    """Latent [latent_len, d] for one scene."""
    model = TrajectoryPredictor(config, params)
    return model.encode_batch(model.collate([scene], include_future=False))[0]


def forward(scene: Scene, params: ModelParams, config: ModelConfig, mode: str = "inference") -> Prediction:
    if mode == "teacher_forced" and scene.future is None:
        raise ContractError(f"scene {scene.scene_id}: teacher-forced forward needs the future")
    return TrajectoryPredictor(config, params).predict([scene], mode)[0]
