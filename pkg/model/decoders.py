"""
===============================================================================
DECODERS - GOAL AND GOAL-CONDITIONED TRAJECTORY
===============================================================================

GoalDecoder:
    goal = MLP_goal(flatten(z))                    [..., latent_len * d] -> [..., 2]

TrajectoryDecoder:
    each latent row r (d wide) is joined with the conditioning goal g:
        h_r = MLP_traj(z_r ++ g)                   [..., latent_len, d + 2] -> [..., 2 * T_pred]
    the rows are mean-pooled and reshaped:
        trajectory = reshape(mean_r h_r, [T_pred, 2])

The conditioning goal is the ground-truth endpoint during teacher-forced
training and the GoalDecoder output at inference.

===============================================================================
"""

import numpy as np

from model.config import ModelConfig
from model.embedding import mlp_from_params
from numerics.ops_util import MLP
from numerics.params_util import ModelParams
from util.errors_util import DimensionError


class GoalDecoder:
    def __init__(self, mlp: MLP):
        self.mlp = mlp

    @classmethod
    def from_params(cls, params: ModelParams, config: ModelConfig) -> "GoalDecoder":
        return cls(mlp_from_params(params, "goal", len(config.goal_mlp) - 1))

    def forward(self, z: np.ndarray):
        flat = z.reshape(z.shape[:-2] + (-1,))
        goal, caches = self.mlp.forward(flat)
        return goal, (caches, z.shape)

    def backward(self, d_goal: np.ndarray, cache) -> np.ndarray:
        caches, z_shape = cache
        return self.mlp.backward(d_goal, caches).reshape(z_shape)


class TrajectoryDecoder:
    def __init__(self, mlp: MLP, t_pred: int):
        self.mlp = mlp
        self.t_pred = t_pred

    @classmethod
    def from_params(cls, params: ModelParams, config: ModelConfig) -> "TrajectoryDecoder":
        return cls(mlp_from_params(params, "traj", len(config.traj_mlp) - 1), config.t_pred)

    def forward(self, z: np.ndarray, goal: np.ndarray):
        if goal.shape[-1] != 2 or goal.shape[:-1] != z.shape[:-2]:
            raise DimensionError(f"goal shape {goal.shape} does not match latent {z.shape}")
        rows = z.shape[-2]
        g = np.broadcast_to(goal[..., None, :], z.shape[:-1] + (2,))
        x = np.concatenate([z, g], axis=-1)
        h, caches = self.mlp.forward(x)
        pooled = h.mean(axis=-2)
        traj = pooled.reshape(pooled.shape[:-1] + (self.t_pred, 2))
        return traj, (caches, rows, z.shape[-1])

    def backward(self, d_traj: np.ndarray, cache):
        """Return (dz, d_goal)."""
        caches, rows, d_model = cache
        d_pooled = d_traj.reshape(d_traj.shape[:-2] + (-1,))
        d_h = np.repeat(d_pooled[..., None, :] / rows, rows, axis=-2)
        dx = self.mlp.backward(d_h, caches)
        return dx[..., :d_model], dx[..., d_model:].sum(axis=-2)


def decode_goal(z: np.ndarray, params: ModelParams, config: ModelConfig) -> np.ndarray:
    return GoalDecoder.from_params(params, config).forward(z)[0]


def decode_trajectory(z: np.ndarray, goal: np.ndarray, params: ModelParams, config: ModelConfig) -> np.ndarray:
    return TrajectoryDecoder.from_params(params, config).forward(z, np.asarray(goal, dtype=z.dtype))[0]
