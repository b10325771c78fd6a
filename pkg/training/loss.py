"""
Combined displacement loss.

    L = ADE(trajectory, gt) + lambda * || goal - gt[T_pred] ||

ADE averages the per-step Euclidean distance over agents and steps; the goal
term averages over agents and supervises the goal decoder. Gradients of a
zero-length distance are taken as 0.
"""

from typing import Dict, Tuple

import numpy as np

from data.trajectory import Trajectory
from model.predictor import Prediction
from util.errors_util import ContractError, DimensionError
from util.transform_util import apply_transform


def _safe_unit(diff: np.ndarray, dist: np.ndarray) -> np.ndarray:
    safe = np.where(dist > 0, dist, 1.0)
    return np.where(dist[..., None] > 0, diff / safe[..., None], 0.0)


def loss_terms(
    trajectory: np.ndarray, goal: np.ndarray, gt: np.ndarray, lam: float
) -> Tuple[float, np.ndarray, np.ndarray, Dict[str, float]]:
    """
    Batched loss and its gradients.

    Parameters
    ----------
    trajectory : [B, T, 2]
    goal : [B, 2]
    gt : [B, T, 2]
    lam : float
        Weight of the goal term.

    Returns
    -------
    (value, d_trajectory, d_goal, parts) with parts = {"ade", "goal_fde"}.
    """
    if trajectory.shape != gt.shape or trajectory.ndim != 3 or trajectory.shape[-1] != 2:
        raise ContractError(f"prediction {trajectory.shape} and ground truth {gt.shape} must both be [B, T, 2]")
    if goal.shape != (gt.shape[0], 2):
        raise DimensionError(f"goal shape {goal.shape} != ({gt.shape[0]}, 2)")
    b, t, _ = gt.shape

    diff = trajectory - gt
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    ade = dist.mean()

    goal_diff = goal - gt[:, -1, :]
    goal_dist = np.sqrt(np.sum(goal_diff * goal_diff, axis=-1))
    goal_fde = goal_dist.mean()

    value = ade + lam * goal_fde
    d_traj = (_safe_unit(diff, dist) / (b * t)).astype(trajectory.dtype)
    d_goal = (lam * _safe_unit(goal_diff, goal_dist) / b).astype(goal.dtype)
    return float(value), d_traj, d_goal, {"ade": float(ade), "goal_fde": float(goal_fde)}


def loss(pred: Prediction, gt_future: Trajectory, lam: float = 0.5) -> float:
    """Scalar loss for one Prediction; a world-frame gt is moved into the agent frame first."""
    if len(gt_future) != len(pred.trajectory):
        raise ContractError(
            f"prediction has {len(pred.trajectory)} steps, ground truth {len(gt_future)}"
        )
    if gt_future.frame != "agent":
        gt_future = apply_transform(pred.transform, gt_future, "agent")
    value, _, _, _ = loss_terms(
        np.asarray(pred.trajectory, dtype=np.float64)[None],
        np.asarray(pred.goal, dtype=np.float64)[None],
        gt_future.points[None],
        lam,
    )
    return value
