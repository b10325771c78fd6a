"""
===============================================================================
NUMERIC OPS - FORWARD / BACKWARD BUILDING BLOCKS (NUMPY)
===============================================================================

Purpose:
    Differentiable primitives used by the predictor, written as explicit
    forward/backward pairs on numpy arrays:

      - linear, relu, mlp
      - softmax (max-subtracted)
      - layer_norm (eps 1e-5 inside the square root)
      - multi_head_attention (scaled dot-product, per-head projections, W^0)

Key behaviors:
    - A "TensorView" is a numpy ndarray in the active precision:
        * fast  -> float32 (training)
        * check -> float64 (oracles, finite differences)
    - Every *_forward returns (output, cache). The cache holds what the matching
      *_backward needs, so forward never mutates shared state and one set of
      parameters can serve concurrent forwards.
    - Backward functions return input gradients and ACCUMULATE parameter
      gradients into the ParamBlock.grad arrays they are given.
    - Leading axes broadcast: x[..., in] @ W[in, out]. Reductions for parameter
      gradients flatten leading axes in C order, so summation order is fixed.

Notes:
    - A ReLU pattern monitor (track_relu_patterns) lets the gradient checker
      reject finite-difference probes that cross a ReLU kink.

===============================================================================
"""

import contextlib
import contextvars
import hashlib
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from util.errors_util import ConfigError, DimensionError, EmptyContextError, NumericError


# =============================================================================
# PRECISION
# =============================================================================
PRECISIONS = {
    "fast": np.float32,
    "check": np.float64,
}

TensorView = np.ndarray

LAYER_NORM_EPS = 1e-5


def dtype_for(precision: str):
    """Return the numpy dtype for a precision mode ('fast' | 'check')."""
    try:
        return PRECISIONS[precision]
    except KeyError:
        raise ConfigError(f"Unknown precision mode '{precision}' (expected one of {sorted(PRECISIONS)})")


def as_tensor(data, precision: str = "check", shape: Optional[Sequence[int]] = None) -> TensorView:
    """
    Build a TensorView from nested lists / arrays.

    Enforces the TensorView invariants: every axis length >= 1 and, when a shape
    is supplied, product(shape) == number of elements.
    """
    arr = np.asarray(data, dtype=dtype_for(precision))
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != arr.size:
            raise DimensionError(f"Cannot view {arr.size} values as shape {shape}")
        arr = arr.reshape(shape)
    if any(s < 1 for s in arr.shape):
        raise DimensionError(f"TensorView axes must all be >= 1, got shape {arr.shape}")
    return arr


# =============================================================================
# RELU PATTERN MONITOR
# =============================================================================
_RELU_PATTERNS: contextvars.ContextVar = contextvars.ContextVar("relu_patterns", default=None)


@contextlib.contextmanager
def track_relu_patterns(keep_preactivations: bool = False):
    """
    Collect a digest of every ReLU on/off pattern produced inside the block.

    With keep_preactivations=True the tracker also keeps a copy of every ReLU
    input, in call order, for margin checks.

    Usage:
        with track_relu_patterns() as patterns:
            model_loss()
        digest = patterns.digest()
    """
    tracker = _ReluPatterns(keep_preactivations)
    token = _RELU_PATTERNS.set(tracker)
    try:
        yield tracker
    finally:
        _RELU_PATTERNS.reset(token)


class _ReluPatterns:
    def __init__(self, keep_preactivations: bool = False):
        self._hash = hashlib.sha1()
        self.keep_preactivations = keep_preactivations
        self.preactivations: List[np.ndarray] = []

    def record(self, pre: np.ndarray) -> None:
        self._hash.update(np.packbits(pre > 0).tobytes())
        if self.keep_preactivations:
            self.preactivations.append(np.array(pre, copy=True))

    def digest(self) -> str:
        return self._hash.hexdigest()


# =============================================================================
# LINEAR
# =============================================================================
def _check_linear_shapes(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> None:
    if W.ndim != 2:
        raise DimensionError(f"linear weight must be 2-D, got shape {W.shape}")
    if x.shape[-1] != W.shape[0]:
        raise DimensionError(
            f"linear input trailing axis {x.shape} does not match weight {W.shape}"
        )
    if b.shape != (W.shape[1],):
        raise DimensionError(f"linear bias shape {b.shape} does not match weight {W.shape}")


def linear_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, tuple]:
    """y = xW + b, broadcast over leading axes of x."""
    _check_linear_shapes(x, W, b)
    y = x @ W + b
    return y, (x, W)


def linear_backward(dy: np.ndarray, cache: tuple, dW: np.ndarray, db: np.ndarray) -> np.ndarray:
    """Accumulate into dW / db (may be None for frozen weights); return dx."""
    x, W = cache
    if dW is not None:
        dW += x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])
    if db is not None:
        db += dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    return dy @ W.T


def linear(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward-only convenience wrapper around linear_forward."""
    return linear_forward(x, W, b)[0]


# =============================================================================
# RELU
# =============================================================================
def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    tracker = _RELU_PATTERNS.get()
    if tracker is not None:
        tracker.record(x)
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dy * mask


# =============================================================================
# MLP
# =============================================================================
@dataclass
class LinearLayer:
    """A pair of ParamBlocks (W [in, out], b [out])."""
    weight: "object"
    bias: "object"

    @property
    def in_features(self) -> int:
        return self.weight.tensor.shape[0]

    @property
    def out_features(self) -> int:
        return self.weight.tensor.shape[1]

    def forward(self, x: np.ndarray):
        return linear_forward(x, self.weight.tensor, self.bias.tensor)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        return linear_backward(dy, cache, self.weight.grad, self.bias.grad)


class MLP:
    """
    Alternating linear / ReLU stack with no activation after the last linear.

    `layers` are LinearLayer objects whose widths chain (w0->w1->...->wn).
    """

    def __init__(self, layers: List[LinearLayer]):
        if not layers:
            raise ConfigError("MLP needs at least one linear layer (width spec with >= 2 entries)")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_features != nxt.in_features:
                raise ConfigError(
                    f"MLP widths do not chain: {prev.out_features} -> {nxt.in_features}"
                )
        self.layers = layers

    @property
    def widths(self) -> List[int]:
        return [self.layers[0].in_features] + [l.out_features for l in self.layers]

    def forward(self, x: np.ndarray):
        caches = []
        h = x
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            h, lin_cache = layer.forward(h)
            relu_mask = None
            if i < last:
                h, relu_mask = relu_forward(h)
            caches.append((lin_cache, relu_mask))
        return h, caches

    def backward(self, dy: np.ndarray, caches) -> np.ndarray:
        g = dy
        for layer, (lin_cache, relu_mask) in zip(reversed(self.layers), reversed(caches)):
            if relu_mask is not None:
                g = relu_backward(g, relu_mask)
            g = layer.backward(g, lin_cache)
        return g


def mlp(x: np.ndarray, weights: Sequence[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """
    Forward-only MLP over raw (W, b) pairs.

    Parameters
    ----------
    x : array [..., widths[0]]
    weights : sequence of (W, b) with chaining widths; ReLU between layers.
    """
    if not weights:
        raise ConfigError("mlp requires a width spec with at least 2 entries")
    h = x
    for i, (W, b) in enumerate(weights):
        h = linear(h, W, b)
        if i < len(weights) - 1:
            h = np.maximum(h, 0)
    return h


# =============================================================================
# SOFTMAX
# =============================================================================
def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stabilized softmax along `axis` (-inf entries get zero mass)."""
    if np.isnan(x).any() or np.isposinf(x).any():
        raise NumericError("softmax received non-finite input")
    m = np.max(x, axis=axis, keepdims=True)
    if np.isneginf(m).any():
        raise NumericError("softmax slice is entirely -inf")
    e = np.exp(x - m)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_backward(dy: np.ndarray, y: np.ndarray, axis: int = -1) -> np.ndarray:
    return y * (dy - np.sum(dy * y, axis=axis, keepdims=True))


# =============================================================================
# LAYER NORM
# =============================================================================
def layer_norm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = LAYER_NORM_EPS):
    d = gamma.shape[0]
    if x.shape[-1] != d or beta.shape != gamma.shape:
        raise DimensionError(
            f"layer_norm input {x.shape} incompatible with gamma {gamma.shape} / beta {beta.shape}"
        )
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    return xhat * gamma + beta, (xhat, inv_std, gamma)


def layer_norm_backward(dy: np.ndarray, cache, dgamma: np.ndarray, dbeta: np.ndarray) -> np.ndarray:
    xhat, inv_std, gamma = cache
    d = xhat.shape[-1]
    if dgamma is not None:
        dgamma += (dy * xhat).reshape(-1, d).sum(axis=0)
    if dbeta is not None:
        dbeta += dy.reshape(-1, d).sum(axis=0)
    dxhat = dy * gamma
    return inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return layer_norm_forward(x, gamma, beta)[0]


class LayerNorm:
    def __init__(self, gamma, beta):
        self.gamma = gamma
        self.beta = beta

    def forward(self, x: np.ndarray):
        return layer_norm_forward(x, self.gamma.tensor, self.beta.tensor)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        return layer_norm_backward(dy, cache, self.gamma.grad, self.beta.grad)


# =============================================================================
# MULTI-HEAD ATTENTION
# =============================================================================
def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    # [..., L, d] -> [..., h, L, d/h]
    *lead, L, d = x.shape
    return np.swapaxes(x.reshape(*lead, L, heads, d // heads), -2, -3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    # [..., h, L, dh] -> [..., L, h*dh]
    x = np.swapaxes(x, -2, -3)
    *lead, L, h, dh = x.shape
    return x.reshape(*lead, L, h * dh)


class MultiHeadAttention:
    """
    MultiHead(Q, K, V) = Concat(h_1..h_H) W^0 with per-head projections.

    Parameter blocks (all LinearLayer):
        q : [d, d]     k : [d_kv, d]     v : [d_kv, d]     o : [d, d]

    key_mask (optional) marks valid keys with True; invalid keys get -inf
    logits before the softmax. Every query row must see at least one valid key.
    """

    def __init__(self, q: LinearLayer, k: LinearLayer, v: LinearLayer, o: LinearLayer, heads: int):
        d = q.out_features
        if d % heads != 0:
            raise ConfigError(f"attention width {d} not divisible by {heads} heads")
        if k.out_features != d or v.out_features != d or o.in_features != d:
            raise ConfigError("attention projections must all map to the same width")
        self.q, self.k, self.v, self.o = q, k, v, o
        self.heads = heads

    @property
    def d_model(self) -> int:
        return self.q.out_features

    def forward(self, q_in: np.ndarray, kv_in: np.ndarray, key_mask: Optional[np.ndarray] = None):
        if kv_in.shape[-2] == 0:
            raise EmptyContextError("attention context has no keys (apply the null-token rule)")
        if q_in.shape[-1] != self.q.in_features:
            raise DimensionError(f"query width {q_in.shape} != projection input {self.q.in_features}")
        if kv_in.shape[-1] != self.k.in_features:
            raise DimensionError(f"key/value width {kv_in.shape} != projection input {self.k.in_features}")

        Q, q_cache = self.q.forward(q_in)
        K, k_cache = self.k.forward(kv_in)
        V, v_cache = self.v.forward(kv_in)

        Qh, Kh, Vh = (_split_heads(t, self.heads) for t in (Q, K, V))
        scale = 1.0 / math.sqrt(Qh.shape[-1])
        scores = (Qh @ np.swapaxes(Kh, -1, -2)) * scale

        if key_mask is not None:
            key_mask = np.asarray(key_mask, dtype=bool)
            if not key_mask.any(axis=-1).all():
                raise EmptyContextError("attention key mask hides every key for some batch item")
            scores = np.where(key_mask[..., None, None, :], scores, -np.inf)

        attn = softmax(scores, axis=-1)
        heads_out = attn @ Vh
        merged = _merge_heads(heads_out)
        out, o_cache = self.o.forward(merged)
        cache = (q_cache, k_cache, v_cache, Qh, Kh, Vh, attn, scale, o_cache)
        return out, cache

    def backward(self, dy: np.ndarray, cache):
        """Return (d_q_in, d_kv_in)."""
        q_cache, k_cache, v_cache, Qh, Kh, Vh, attn, scale, o_cache = cache
        d_merged = self.o.backward(dy, o_cache)
        d_heads = _split_heads(d_merged, self.heads)

        d_attn = d_heads @ np.swapaxes(Vh, -1, -2)
        dVh = np.swapaxes(attn, -1, -2) @ d_heads
        d_scores = softmax_backward(d_attn, attn, axis=-1) * scale
        dQh = d_scores @ Kh
        dKh = np.swapaxes(d_scores, -1, -2) @ Qh

        dq_in = self.q.backward(_merge_heads(dQh), q_cache)
        dkv_in = self.k.backward(_merge_heads(dKh), k_cache)
        dkv_in = dkv_in + self.v.backward(_merge_heads(dVh), v_cache)
        return dq_in, dkv_in


def multi_head_attention(q_in, kv_in, heads: int, attention: MultiHeadAttention, key_mask=None):
    """Forward-only wrapper; `attention` carries the projection parameters."""
    if attention.heads != heads:
        raise ConfigError(f"attention built for {attention.heads} heads, called with {heads}")
    return attention.forward(q_in, kv_in, key_mask)[0]
