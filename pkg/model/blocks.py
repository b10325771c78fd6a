"""
===============================================================================
ENCODER BLOCK - CROSS-ATTENTIONS + LATENT TRANSFORMER
===============================================================================

One block refines the latent z (shape [..., latent_len, d]):

    for each context (agent, neighbor[, image]):
        z = z + MHA(LN_q(z), LN_kv(tokens), key_mask)
    z = z + MHA(LN(z), LN(z))                       latent self-attention
    z = z + FF(LN(z))                               d -> ff_mult*d -> d, ReLU

All sub-blocks are pre-norm with residual connections (GPT-2 layout). Every
forward returns (output, cache); backward returns gradients w.r.t. z and each
context's tokens and accumulates parameter gradients.

===============================================================================
"""

from typing import Dict, List, Optional, Tuple

import numpy as np

from model.config import ModelConfig
from model.embedding import mlp_from_params
from model.params import block_prefixes, cross_attention_names
from numerics.ops_util import MLP, LayerNorm, LinearLayer, MultiHeadAttention
from numerics.params_util import ModelParams
from util.errors_util import DimensionError

Context = Tuple[np.ndarray, Optional[np.ndarray]]


def _layer_norm(params: ModelParams, prefix: str) -> LayerNorm:
    return LayerNorm(params[f"{prefix}.gamma"], params[f"{prefix}.beta"])


def _attention(params: ModelParams, prefix: str, heads: int) -> MultiHeadAttention:
    def lin(name):
        return LinearLayer(params[f"{prefix}.{name}.W"], params[f"{prefix}.{name}.b"])

    return MultiHeadAttention(lin("q"), lin("k"), lin("v"), lin("o"), heads)


class CrossAttention:
    def __init__(self, ln_q: LayerNorm, ln_kv: LayerNorm, attn: MultiHeadAttention):
        self.ln_q = ln_q
        self.ln_kv = ln_kv
        self.attn = attn

    @classmethod
    def from_params(cls, params: ModelParams, prefix: str, heads: int) -> "CrossAttention":
        return cls(
            _layer_norm(params, f"{prefix}.ln_q"),
            _layer_norm(params, f"{prefix}.ln_kv"),
            _attention(params, f"{prefix}.attn", heads),
        )

    def forward(self, z: np.ndarray, tokens: np.ndarray, key_mask: Optional[np.ndarray] = None):
        if tokens.shape[-1] != self.attn.d_model:
            raise DimensionError(
                f"context token width {tokens.shape[-1]} != d_model {self.attn.d_model}"
            )
        zq, cache_q = self.ln_q.forward(z)
        kv, cache_kv = self.ln_kv.forward(tokens)
        out, cache_attn = self.attn.forward(zq, kv, key_mask)
        return z + out, (cache_q, cache_kv, cache_attn)

    def backward(self, dz_out: np.ndarray, cache):
        cache_q, cache_kv, cache_attn = cache
        dzq, dkv = self.attn.backward(dz_out, cache_attn)
        dz = dz_out + self.ln_q.backward(dzq, cache_q)
        return dz, self.ln_kv.backward(dkv, cache_kv)


class LatentTransformer:
    def __init__(self, ln_attn: LayerNorm, attn: MultiHeadAttention, ln_ff: LayerNorm, ff: MLP):
        self.ln_attn = ln_attn
        self.attn = attn
        self.ln_ff = ln_ff
        self.ff = ff

    @classmethod
    def from_params(cls, params: ModelParams, prefix: str, heads: int) -> "LatentTransformer":
        return cls(
            _layer_norm(params, f"{prefix}.self.ln"),
            _attention(params, f"{prefix}.self.attn", heads),
            _layer_norm(params, f"{prefix}.ff.ln"),
            mlp_from_params(params, f"{prefix}.ff.mlp", 2),
        )

    def forward(self, z: np.ndarray):
        h, cache_ln1 = self.ln_attn.forward(z)
        a, cache_attn = self.attn.forward(h, h)
        z1 = z + a
        h2, cache_ln2 = self.ln_ff.forward(z1)
        f, cache_ff = self.ff.forward(h2)
        return z1 + f, (cache_ln1, cache_attn, cache_ln2, cache_ff)

    def backward(self, dz_out: np.ndarray, cache) -> np.ndarray:
        cache_ln1, cache_attn, cache_ln2, cache_ff = cache
        dz1 = dz_out + self.ln_ff.backward(self.ff.backward(dz_out, cache_ff), cache_ln2)
        dq, dkv = self.attn.backward(dz1, cache_attn)
        # queries, keys and values all read the same normalized latent
        return dz1 + self.ln_attn.backward(dq + dkv, cache_ln1)


class EncoderBlock:
    def __init__(self, cross: List[Tuple[str, CrossAttention]], latent: LatentTransformer):
        self.cross = cross
        self.latent = latent

    @classmethod
    def from_params(cls, params: ModelParams, prefix: str, config: ModelConfig) -> "EncoderBlock":
        cross = [
            (name, CrossAttention.from_params(params, f"{prefix}.{name}", config.heads))
            for name in cross_attention_names(config)
        ]
        return cls(cross, LatentTransformer.from_params(params, prefix, config.heads))

    @property
    def context_names(self) -> List[str]:
        return [name for name, _ in self.cross]

    def forward(self, z: np.ndarray, contexts: Dict[str, Context]):
        caches = []
        for name, xattn in self.cross:
            tokens, mask = contexts[name]
            z, cache = xattn.forward(z, tokens, mask)
            caches.append(cache)
        z, cache_latent = self.latent.forward(z)
        return z, (caches, cache_latent)

    def backward(self, dz: np.ndarray, cache):
        caches, cache_latent = cache
        dz = self.latent.backward(dz, cache_latent)
        d_contexts = {}
        for (name, xattn), c in zip(reversed(self.cross), reversed(caches)):
            dz, d_contexts[name] = xattn.backward(dz, c)
        return dz, d_contexts


def encoder_block(z: np.ndarray, agent_tokens, neighbor_tokens, image_tokens=None, *,
                  params: ModelParams, config: ModelConfig, block: int = 0,
                  neighbor_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Forward-only single block over explicit token arrays."""
    enc = EncoderBlock.from_params(params, block_prefixes(config)[block], config)
    contexts = {"agent": (agent_tokens, None), "neighbor": (neighbor_tokens, neighbor_mask)}
    if config.image_enabled:
        if image_tokens is None:
            raise DimensionError("patch backbone block needs image tokens")
        contexts["image"] = (image_tokens, None)
    return enc.forward(z, contexts)[0]
