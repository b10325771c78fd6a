"""
Encoder: the learnable initial latent refined by n_blocks EncoderBlocks.

With tie_blocks every block object reads the same parameter paths, so their
gradients accumulate into one set of buffers.
"""

from typing import Dict, List

import numpy as np

from model.blocks import Context, EncoderBlock
from model.config import ModelConfig
from model.params import block_prefixes
from numerics.params_util import ModelParams


class Encoder:
    def __init__(self, latent, blocks: List[EncoderBlock]):
        self.latent = latent
        self.blocks = blocks

    @classmethod
    def from_params(cls, params: ModelParams, config: ModelConfig) -> "Encoder":
        blocks = [EncoderBlock.from_params(params, prefix, config) for prefix in block_prefixes(config)]
        return cls(params["latent"], blocks)

    def forward(self, batch_size: int, contexts: Dict[str, Context]):
        """Return z [B, latent_len, d] and the per-block caches."""
        z = np.broadcast_to(self.latent.tensor, (batch_size,) + self.latent.tensor.shape).copy()
        caches = []
        for block in self.blocks:
            z, cache = block.forward(z, contexts)
            caches.append(cache)
        return z, caches

    def backward(self, dz: np.ndarray, caches) -> Dict[str, np.ndarray]:
        """Accumulate block and latent gradients; return summed context-token gradients."""
        d_contexts: Dict[str, np.ndarray] = {}
        for block, cache in zip(reversed(self.blocks), reversed(caches)):
            dz, d_ctx = block.backward(dz, cache)
            for name, g in d_ctx.items():
                d_contexts[name] = g if name not in d_contexts else d_contexts[name] + g
        self.latent.grad += dz.sum(axis=0)
        return d_contexts
