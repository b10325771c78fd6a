"""
===============================================================================
ADAM OPTIMIZER
===============================================================================

Purpose:
    Bias-corrected Adam over a ModelParams registry.

Key behaviors:
    - Moments are kept per parameter path, created lazily on the first step.
    - Gradients are validated first; a non-finite gradient aborts the step
      before any parameter is touched, naming the offending path.
    - lr == 0 leaves every parameter untouched (moments still advance).

===============================================================================
"""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from numerics.params_util import ModelParams
from util.errors_util import TrainingError

logger = logging.getLogger("Adam")


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, params: ModelParams) -> None:
        for block in params:
            if block.name not in self.m:
                self.m[block.name] = np.zeros_like(block.tensor)
                self.v[block.name] = np.zeros_like(block.tensor)


def adam_step(params: ModelParams, state: AdamState, lr: float) -> ModelParams:
    """
    Apply one Adam update in place and return `params`.

    Raises
    ------
    TrainingError
        When any gradient holds NaN/inf (no parameter is modified).
    """
    for block in params:
        if not np.all(np.isfinite(block.grad)):
            logger.error("Non-finite gradient in '%s'", block.name)
            raise TrainingError(f"non-finite gradient for parameter '{block.name}'")

    state.ensure(params)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step

    for block in params:
        g = block.grad
        m = state.m[block.name]
        v = state.v[block.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if lr == 0:
            continue
        m_hat = m / correction1
        v_hat = v / correction2
        block.tensor -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(block.tensor.dtype)
    return params
