"""
Displacement metrics over matched [N, T_pred, 2] arrays.

    ade = mean over agents and steps of ||pred - gt||
    fde = mean over agents of ||pred[T_pred] - gt[T_pred]||

Both raise EmptyMetricError when N == 0.
"""

import numpy as np

from util.errors_util import DimensionError, EmptyMetricError


def _check(preds, gts):
    preds = np.asarray(preds, dtype=np.float64)
    gts = np.asarray(gts, dtype=np.float64)
    if preds.shape != gts.shape or preds.ndim != 3 or preds.shape[-1] != 2:
        raise DimensionError(f"metrics need matched [N, T, 2] arrays, got {preds.shape} / {gts.shape}")
    if preds.shape[0] == 0:
        raise EmptyMetricError("no trajectories to score (N == 0)")
    return preds, gts


def displacement(preds, gts) -> np.ndarray:
    """Per-agent, per-step Euclidean error [N, T]."""
    preds, gts = _check(preds, gts)
    return np.linalg.norm(preds - gts, axis=-1)


def ade(preds, gts) -> float:
    return float(displacement(preds, gts).mean())


def fde(preds, gts) -> float:
    preds, gts = _check(preds, gts)
    return float(np.linalg.norm(preds[:, -1] - gts[:, -1], axis=-1).mean())
