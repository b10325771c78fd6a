"""
===============================================================================
PREDICTOR PARAMETERS - NAMES AND SEEDED INITIALIZATION
===============================================================================

Parameter paths (registration order == checkpoint order):

    latent                      [latent_len, d]      normal(0, 0.02)
    null_token                  [1, d]               normal(0, 0.02)
    pose.{i}.W / pose.{i}.b     pose MLP layers
    image.proj.W / .b           [p*p*3, d] patch projection      (patch backbone)
    image.pos                   [P, d] 2-D positional embedding (patch backbone)
    blocks.{k}.agent.*          cross-attention over main-agent tokens
    blocks.{k}.neighbor.*       cross-attention over neighbor tokens
    blocks.{k}.image.*          cross-attention over image tokens (patch backbone)
        ln_q.gamma/beta, ln_kv.gamma/beta, attn.{q,k,v,o}.W/b
    blocks.{k}.self.*           latent self-attention: ln.gamma/beta, attn.{q,k,v,o}.W/b
    blocks.{k}.ff.*             feed-forward: ln.gamma/beta, mlp.{0,1}.W/b
    goal.{i}.W / .b             goal MLP
    traj.{i}.W / .b             trajectory MLP

With tie_blocks every block reads "blocks.shared.*" instead of blocks.{k}.

Initialization:
    linear weights  Kaiming-uniform, bound sqrt(6 / fan_in)
    biases          zeros
    layer norms     gamma = 1, beta = 0

===============================================================================
"""

import math
from typing import List

import numpy as np

from model.config import ModelConfig
from numerics.params_util import ModelParams

EMBED_STD = 0.02


def block_prefixes(config: ModelConfig) -> List[str]:
    if config.tie_blocks:
        return ["blocks.shared"] * config.n_blocks
    return [f"blocks.{k}" for k in range(config.n_blocks)]


def cross_attention_names(config: ModelConfig) -> List[str]:
    names = ["agent", "neighbor"]
    if config.image_enabled:
        names.append("image")
    return names


class _Initializer:
    def __init__(self, params: ModelParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng

    def linear(self, prefix: str, fan_in: int, fan_out: int) -> None:
        bound = math.sqrt(6.0 / fan_in)
        self.params.add(f"{prefix}.W", self.rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        self.params.add(f"{prefix}.b", np.zeros(fan_out))

    def mlp(self, prefix: str, widths) -> None:
        for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            self.linear(f"{prefix}.{i}", fan_in, fan_out)

    def layer_norm(self, prefix: str, d: int) -> None:
        self.params.add(f"{prefix}.gamma", np.ones(d))
        self.params.add(f"{prefix}.beta", np.zeros(d))

    def attention(self, prefix: str, d: int, d_kv: int) -> None:
        self.linear(f"{prefix}.q", d, d)
        self.linear(f"{prefix}.k", d_kv, d)
        self.linear(f"{prefix}.v", d_kv, d)
        self.linear(f"{prefix}.o", d, d)

    def normal(self, name: str, shape) -> None:
        self.params.add(name, self.rng.normal(0.0, EMBED_STD, size=shape))


def init_params(config: ModelConfig, seed: int = 0, dtype=np.float64) -> ModelParams:
    """
    Draw every parameter from one seeded generator in registration order.

    Values are drawn in float64 and cast, so fast and check precision start
    from the same point.
    """
    params = ModelParams(dtype=dtype)
    init = _Initializer(params, np.random.default_rng(seed))
    d = config.d_model

    init.normal("latent", (config.latent_len, d))
    init.normal("null_token", (1, d))
    init.mlp("pose", config.pose_mlp)
    if config.image_enabled:
        init.linear("image.proj", config.patch_dim, d)
        init.normal("image.pos", (config.patch_count, d))

    seen = set()
    for prefix in block_prefixes(config):
        if prefix in seen:
            continue
        seen.add(prefix)
        for name in cross_attention_names(config):
            init.layer_norm(f"{prefix}.{name}.ln_q", d)
            init.layer_norm(f"{prefix}.{name}.ln_kv", d)
            init.attention(f"{prefix}.{name}.attn", d, d)
        init.layer_norm(f"{prefix}.self.ln", d)
        init.attention(f"{prefix}.self.attn", d, d)
        init.layer_norm(f"{prefix}.ff.ln", d)
        init.mlp(f"{prefix}.ff.mlp", (d, config.ff_dim, d))

    init.mlp("goal", config.goal_mlp)
    init.mlp("traj", config.traj_mlp)
    return params


def expected_shapes(config: ModelConfig):
    """Parameter shapes for `config`, used to validate loaded checkpoints."""
    return init_params(config, seed=0).shapes()
