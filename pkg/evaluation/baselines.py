"""
Deterministic baselines.

linear_baseline: constant velocity from the last two observed points,
    step k (1-based) = last + k * (last - previous)
"""

import numpy as np

from data.trajectory import DEFAULT_T_PRED, Trajectory
from util.errors_util import ConfigError, ContractError

BASELINES = ("linear",)


def linear_baseline(observed: Trajectory, t_pred: int = DEFAULT_T_PRED) -> np.ndarray:
    if len(observed) < 2:
        raise ContractError(f"linear baseline needs >= 2 observed points, got {len(observed)}")
    last = observed.points[-1]
    velocity = last - observed.points[-2]
    k = np.arange(1, t_pred + 1, dtype=np.float64)[:, None]
    return last + k * velocity


def baseline_for(name: str):
    if name == "linear":
        return linear_baseline
    raise ConfigError(f"unknown baseline '{name}' (expected one of {BASELINES})")
