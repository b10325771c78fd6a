"""
===============================================================================
SCENE BUILDER - FIXED-HORIZON WINDOWS OVER PARSED TRACKS
===============================================================================

Purpose:
    Turns per-agent trajectories of one recording into prediction Scenes:

      - one Scene per (agent, window start) where the agent covers every step
        of the t_obs + t_pred window
      - neighbors: every other agent with >= 1 point in the observed window

Key behaviors:
    - Windows advance by `stride` steps (default 1, maximal overlap).
    - Neighbor tracks are laid on the observed steps; a step the neighbor was
      not seen repeats its nearest seen point (earlier wins on ties) and
      carries mask == False.
    - Output order is (agent_id, start); build_all_scenes merges recordings in
      sorted dataset order.

===============================================================================
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from data.trajectory import DEFAULT_T_OBS, DEFAULT_T_PRED, Scene, Trajectory
from util.errors_util import ConfigError, DataError

logger = logging.getLogger("SceneBuilder")


def _window_starts(steps: np.ndarray, total: int, stride: int) -> List[int]:
    """Window starts whose [start, start + total) is fully covered by `steps`."""
    if len(steps) < total:
        return []
    # contiguous runs of consecutive steps
    breaks = np.flatnonzero(np.diff(steps) != 1) + 1
    starts = []
    for run in np.split(steps, breaks):
        if len(run) < total:
            continue
        first, last = int(run[0]), int(run[-1])
        starts.extend(range(first, last - total + 2, stride))
    return starts


def _neighbor_on_window(track: Trajectory, window: np.ndarray) -> Optional[Trajectory]:
    inside = np.isin(track.steps, window)
    if not inside.any():
        return None
    seen_steps = track.steps[inside]
    seen_points = track.points[inside]

    # nearest seen step for every window step; argmin keeps the earlier one on ties
    distance = np.abs(window[:, None] - seen_steps[None, :])
    nearest = np.argmin(distance, axis=1)
    points = seen_points[nearest]
    mask = np.isin(window, seen_steps)
    return Trajectory(
        agent_id=track.agent_id,
        label=track.label,
        steps=window.copy(),
        points=points,
        units=track.units,
        dt=track.dt,
        frame=track.frame,
        mask=mask,
    )


def build_scenes(
    tracks: Sequence[Trajectory],
    dataset: str = "",
    *,
    t_obs: int = DEFAULT_T_OBS,
    t_pred: int = DEFAULT_T_PRED,
    stride: int = 1,
    image=None,
    recording: str = "",
) -> List[Scene]:
    """
    Slide a t_obs + t_pred window over every agent of one recording.

    Parameters
    ----------
    tracks : sequence of Trajectory
        All agents of one recording on a common step grid.
    dataset : str
        Tag stored on every Scene (and in scene ids).
    image : BevImage, optional
        Reference image shared by every scene of the recording.
    recording : str
        Recording name inside the dataset; added to scene ids so several
        recordings of one dataset keep distinct ids.
    """
    if t_obs < 2 or t_pred < 1:
        raise ConfigError(f"need t_obs >= 2 and t_pred >= 1, got {t_obs}/{t_pred}")
    if stride < 1:
        raise ConfigError(f"scene stride must be >= 1, got {stride}")
    units = {t.units for t in tracks}
    if len(units) > 1:
        raise DataError(f"dataset '{dataset}' mixes units {sorted(units)}")
    ids = [t.agent_id for t in tracks]
    if len(set(ids)) != len(ids):
        raise DataError(f"dataset '{dataset}' repeats agent ids")

    total = t_obs + t_pred
    prefix = f"{dataset}/{recording}" if recording else dataset
    ordered = sorted(tracks, key=lambda t: t.agent_id)
    spans = [(int(t.steps[0]), int(t.steps[-1])) if len(t) else (0, -1) for t in ordered]

    scenes = []
    skipped = 0
    for main in ordered:
        starts = _window_starts(main.steps, total, stride)
        if not starts:
            skipped += 1
            continue
        for start in starts:
            window = np.arange(start, start + t_obs, dtype=np.int64)
            neighbors = []
            for other, (lo, hi) in zip(ordered, spans):
                if other.agent_id == main.agent_id or hi < start or lo >= start + t_obs:
                    continue
                neighbor = _neighbor_on_window(other, window)
                if neighbor is not None:
                    neighbors.append(neighbor)
            scenes.append(
                Scene(
                    scene_id=f"{prefix}/{main.agent_id}/{start}",
                    dataset=dataset,
                    observed=main.slice_steps(start, start + t_obs),
                    future=main.slice_steps(start + t_obs, start + total),
                    neighbors=neighbors,
                    image=image,
                    t_obs=t_obs,
                    t_pred=t_pred,
                )
            )

    logger.info(
        "Dataset '%s': %d scenes from %d agents (%d agents without a full %d-step window)",
        dataset, len(scenes), len(ordered), skipped, total,
    )
    return scenes


def build_all_scenes(
    tracks_by_dataset: Dict[str, Sequence[Trajectory]],
    *,
    images: Optional[Dict[str, object]] = None,
    **kwargs,
) -> Dict[str, List[Scene]]:
    """Build every recording, keyed and ordered by dataset name."""
    images = images or {}
    return {
        name: build_scenes(tracks_by_dataset[name], name, image=images.get(name), **kwargs)
        for name in sorted(tracks_by_dataset)
    }
