"""
Token embedding: shared pose MLP per timestep, concatenated with a sinusoidal
temporal encoding.

    token[t] = pose_mlp(p_t) ++ PE[t]
    PE[pos, 2i]   = sin(pos * exp(-4 i / D))
    PE[pos, 2i+1] = cos(pos * exp(-4 i / D))      D = pe_dim
"""

import numpy as np

from data.trajectory import Trajectory
from model.config import ModelConfig
from numerics.ops_util import MLP, LinearLayer
from numerics.params_util import ModelParams
from util.errors_util import ConfigError, ContractError, DimensionError


def positional_encoding(length: int, pe_dim: int, dtype=np.float64) -> np.ndarray:
    if pe_dim < 2 or pe_dim % 2:
        raise ConfigError(f"pe_dim must be even and >= 2, got {pe_dim}")
    if length < 1:
        raise ConfigError(f"positional encoding length must be >= 1, got {length}")
    pos = np.arange(length, dtype=np.float64)[:, None]
    freq = np.exp(-4.0 * np.arange(pe_dim // 2, dtype=np.float64) / pe_dim)
    pe = np.empty((length, pe_dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq)
    return pe.astype(dtype)


def mlp_from_params(params: ModelParams, prefix: str, n_layers: int) -> MLP:
    return MLP([LinearLayer(params[f"{prefix}.{i}.W"], params[f"{prefix}.{i}.b"]) for i in range(n_layers)])


class TokenEmbedder:
    """Pose MLP + temporal encoding; one instance serves main agent and neighbors."""

    def __init__(self, pose: MLP, pe: np.ndarray):
        self.pose = pose
        self.pe = pe

    @classmethod
    def from_params(cls, params: ModelParams, config: ModelConfig) -> "TokenEmbedder":
        pose = mlp_from_params(params, "pose", len(config.pose_mlp) - 1)
        return cls(pose, positional_encoding(config.t_obs, config.pe_dim, params.dtype))

    def forward(self, points: np.ndarray):
        """points [..., T, 2] -> tokens [..., T, pose_dim + pe_dim]."""
        if points.shape[-1] != 2 or points.shape[-2] != self.pe.shape[0]:
            raise DimensionError(
                f"token input must be [..., {self.pe.shape[0]}, 2], got {points.shape}"
            )
        pose, caches = self.pose.forward(points)
        pe = np.broadcast_to(self.pe, pose.shape[:-1] + (self.pe.shape[1],))
        return np.concatenate([pose, pe], axis=-1), caches

    def backward(self, d_tokens: np.ndarray, caches) -> None:
        pose_dim = self.pose.widths[-1]
        self.pose.backward(d_tokens[..., :pose_dim], caches)


def embed_tokens(traj: Trajectory, params: ModelParams, config: ModelConfig) -> np.ndarray:
    """Tokens [T, d_model] for a trajectory already in the agent-centric frame."""
    if traj.frame != "agent":
        raise ContractError(
            f"embed_tokens needs an agent-centric trajectory, got frame '{traj.frame}'"
        )
    embedder = TokenEmbedder.from_params(params, config)
    embedder.pe = positional_encoding(len(traj), config.pe_dim, params.dtype)
    tokens, _ = embedder.forward(traj.points.astype(params.dtype))
    return tokens
