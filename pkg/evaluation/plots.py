"""
Static figures (matplotlib, Agg backend).

plot_trajectories: one panel per scene in world coordinates; observed and
    true future in blue, prediction in red, linear baseline dashed gray,
    neighbors in light gray.
plot_error_distribution: FDE histogram with median line, and the 2-D final
    error cloud with its KDE mass contours.
"""

import math
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from data.trajectory import Scene  # noqa: E402
from evaluation.baselines import linear_baseline  # noqa: E402
from evaluation.distribution import ErrorDistribution  # noqa: E402
from util.errors_util import ContractError  # noqa: E402


def plot_trajectories(
    scenes: Sequence[Scene],
    predictions: Sequence[np.ndarray],
    path,
    *,
    show_baseline: bool = True,
    columns: int = 4,
) -> Path:
    """`predictions` are world-frame [T_pred, 2] arrays matching `scenes`."""
    if len(scenes) != len(predictions):
        raise ContractError(f"{len(scenes)} scenes but {len(predictions)} predictions")
    if not scenes:
        raise ContractError("nothing to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    cols = min(columns, len(scenes))
    rows = math.ceil(len(scenes) / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.2 * rows), squeeze=False)
    for ax in axes.ravel()[len(scenes):]:
        ax.axis("off")

    for ax, scene, pred in zip(axes.ravel(), scenes, predictions):
        for n in scene.neighbors:
            pts = n.points[n.mask]
            ax.plot(pts[:, 0], pts[:, 1], color="0.8", linewidth=1)
        obs = scene.observed.points
        ax.plot(obs[:, 0], obs[:, 1], "o-", color="tab:blue", markersize=2, label="observed")
        if scene.future is not None:
            fut = np.vstack([obs[-1:], scene.future.points])
            ax.plot(fut[:, 0], fut[:, 1], "-", color="tab:blue", label="ground truth")
        pred = np.vstack([obs[-1:], np.asarray(pred)])
        ax.plot(pred[:, 0], pred[:, 1], "-", color="tab:red", label="prediction")
        if show_baseline:
            base = np.vstack([obs[-1:], linear_baseline(scene.observed, scene.t_pred)])
            ax.plot(base[:, 0], base[:, 1], "--", color="0.4", linewidth=1, label="linear")
        ax.set_title(scene.scene_id, fontsize=7)
        ax.set_aspect("equal", adjustable="datalim")
        ax.tick_params(labelsize=6)
        if scene.units == "pixels":
            ax.invert_yaxis()

    axes.ravel()[0].legend(fontsize=6, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_error_distribution(dist: ErrorDistribution, path, title: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax_hist, ax_cloud) = plt.subplots(1, 2, figsize=(9, 4))

    widths = np.diff(dist.edges)
    ax_hist.bar(dist.edges[:-1], dist.counts, width=widths, align="edge", color="tab:blue", alpha=0.7)
    ax_hist.axvline(dist.median, color="tab:red", linestyle="--", label=f"median {dist.median:.2f}")
    ax_hist.set_xlabel(f"final displacement error ({dist.units})")
    ax_hist.set_ylabel("scenes")
    ax_hist.legend(fontsize=8)

    ax_cloud.scatter(dist.points[:, 0], dist.points[:, 1], s=4, color="tab:blue", alpha=0.5)
    if dist.density is not None and dist.contour_levels:
        # contour() wants strictly increasing levels
        levels = sorted(set(dist.contour_levels.values()))
        cs = ax_cloud.contour(dist.grid_x, dist.grid_y, dist.density, levels=levels, colors="tab:red")
        ax_cloud.clabel(cs, fontsize=6, fmt={lv: f"{m:.0%}" for m, lv in dist.contour_levels.items()})
    ax_cloud.axhline(0, color="0.7", linewidth=0.5)
    ax_cloud.axvline(0, color="0.7", linewidth=0.5)
    ax_cloud.set_xlabel(f"along-track error ({dist.units})")
    ax_cloud.set_ylabel(f"cross-track error ({dist.units})")
    ax_cloud.set_aspect("equal", adjustable="datalim")

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
