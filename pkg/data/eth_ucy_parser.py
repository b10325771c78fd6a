"""
===============================================================================
ETH / UCY ANNOTATION PARSER
===============================================================================

Purpose:
    Reads the four-column pedestrian annotation files used by the ETH and UCY
    benchmarks and returns one Trajectory per pedestrian id.

Input rows (whitespace-delimited):
    frame   agent_id   x   y

Key behaviors:
    - Frames are annotated every k video frames (2.5 Hz, Δt = 0.4 s). k is
      inferred as the gcd of all frame offsets unless given explicitly; steps
      are (frame - first_frame) / k so every agent in a file shares one grid.
    - An optional 3x3 homography maps (x, y, 1) to world meters (projective
      divide applied). Files already in meters pass through unchanged.
    - Rows for one id must appear in strictly increasing frame order.

Errors:
    - ParseError (with line number) for malformed rows
    - DataError for non-monotone frames or frames off the inferred grid
    - PathError for missing files

===============================================================================
"""

import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from data.annotation_table import read_annotation_table, require_integral
from data.trajectory import DEFAULT_DT, Trajectory
from util.errors_util import DataError, DimensionError, PathError

logger = logging.getLogger("EthUcyParser")

ETH_UCY_COLUMNS = ("frame", "agent_id", "x", "y")
ETH_UCY_DATASETS = ("eth", "hotel", "univ", "zara1", "zara2")


def load_homography(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise PathError(path)
    H = np.loadtxt(path, dtype=np.float64)
    if H.shape != (3, 3):
        raise DimensionError(f"{path}: homography must be 3x3, got {H.shape}")
    return H


def apply_homography(H: np.ndarray, points: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.shape != (3, 3):
        raise DimensionError(f"homography must be 3x3, got {H.shape}")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    homogeneous = np.hstack([points, np.ones((len(points), 1))]) @ H.T
    w = homogeneous[:, 2:3]
    if np.any(np.abs(w) < 1e-12):
        raise DataError("homography maps a point to infinity")
    return homogeneous[:, :2] / w


def infer_frame_step(frames: np.ndarray) -> int:
    offsets = np.unique(frames - frames.min()) if len(frames) else np.zeros(0, dtype=np.int64)
    offsets = offsets[offsets > 0]
    if len(offsets) == 0:
        return 1
    return int(np.gcd.reduce(offsets))


def parse_eth_ucy(
    path,
    homography: Optional[np.ndarray] = None,
    *,
    frame_step: Optional[int] = None,
    dt: float = DEFAULT_DT,
) -> List[Trajectory]:
    """
    Parse one ETH/UCY annotation file.

    Parameters
    ----------
    path : str | Path
    homography : optional 3x3 array
        Image -> world mapping applied to every (x, y) row.
    frame_step : optional int
        Video frames per annotation step; inferred when omitted.
    dt : float
        Seconds per annotation step.

    Returns
    -------
    list[Trajectory]
        Sorted by agent id, units "meters", label "Pedestrian".
    """
    path = Path(path)
    df = read_annotation_table(path, ETH_UCY_COLUMNS, numeric=ETH_UCY_COLUMNS)
    if df.empty:
        logger.warning("No annotation rows in %s", path)
        return []
    require_integral(df, "frame", path)
    require_integral(df, "agent_id", path)

    frames = df["frame"].to_numpy().astype(np.int64)
    first_frame = int(frames.min())
    step = frame_step if frame_step is not None else infer_frame_step(frames)
    if step < 1:
        raise DataError(f"{path}: frame step must be >= 1, got {step}")
    off_grid = (frames - first_frame) % step != 0
    if off_grid.any():
        row = int(np.argmax(off_grid))
        raise DataError(
            f"{path}:{int(df['line'].iloc[row])}: frame {frames[row]} is off the {step}-frame grid"
        )

    points = df[["x", "y"]].to_numpy()
    if homography is not None:
        points = apply_homography(homography, points)
    df = df.assign(step=(frames - first_frame) // step, wx=points[:, 0], wy=points[:, 1])
    df["agent_id"] = df["agent_id"].astype(np.int64)

    trajectories = []
    for agent_id, rows in df.groupby("agent_id", sort=True):
        steps = rows["step"].to_numpy()
        if len(steps) > 1 and np.any(np.diff(steps) <= 0):
            bad = int(np.argmax(np.diff(steps) <= 0)) + 1
            raise DataError(
                f"{path}:{int(rows['line'].iloc[bad])}: frames for agent {agent_id} are not strictly increasing"
            )
        trajectories.append(
            Trajectory(
                agent_id=int(agent_id),
                label="Pedestrian",
                steps=steps,
                points=rows[["wx", "wy"]].to_numpy(),
                units="meters",
                dt=dt,
            )
        )

    logger.info(
        "Parsed %s: %d rows, %d agents, frame step %d",
        path.name, len(df), len(trajectories), step,
    )
    return trajectories
