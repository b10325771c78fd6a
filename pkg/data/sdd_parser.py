"""
===============================================================================
STANFORD DRONE DATASET (SDD) ANNOTATION PARSER
===============================================================================

Purpose:
    Reads an SDD `annotations.txt` file and returns bounding-box center
    trajectories in pixels on the Δt = 0.4 s grid.

Input rows (whitespace-delimited, label quoted):
    agent_id xmin ymin xmax ymax frame lost occluded generated "label"

Key behaviors:
    - Unknown labels are rejected before any filtering.
    - Rows whose flag (lost / occluded / generated) is set and listed in
      drop_flags are removed; default drops only "lost".
    - Only classes in keep_classes are kept; default {"Pedestrian"}.
    - Video frames are subsampled: frame % frame_stride == 0 (30 fps -> 2.5 Hz
      with stride 12), step = frame // frame_stride.

===============================================================================
"""

import logging
from pathlib import Path
from typing import Iterable, List

import numpy as np

from data.annotation_table import read_annotation_table, require_integral
from data.trajectory import DEFAULT_DT, Trajectory
from util.errors_util import ConfigError, DataError

logger = logging.getLogger("SddParser")

SDD_COLUMNS = ("agent_id", "xmin", "ymin", "xmax", "ymax", "frame", "lost", "occluded", "generated", "label")
SDD_NUMERIC = SDD_COLUMNS[:-1]
SDD_LABELS = ("Pedestrian", "Biker", "Skater", "Cart", "Car", "Bus")
SDD_FLAGS = ("lost", "occluded", "generated")

DEFAULT_KEEP_CLASSES = frozenset({"Pedestrian"})
DEFAULT_DROP_FLAGS = frozenset({"lost"})
DEFAULT_FRAME_STRIDE = 12


def _validate_filters(keep_classes: frozenset, drop_flags: frozenset) -> None:
    unknown_classes = sorted(keep_classes - set(SDD_LABELS))
    if unknown_classes:
        raise ConfigError(f"unknown SDD classes in keep_classes: {unknown_classes} (known: {list(SDD_LABELS)})")
    unknown_flags = sorted(drop_flags - set(SDD_FLAGS))
    if unknown_flags:
        raise ConfigError(f"unknown SDD flags in drop_flags: {unknown_flags} (known: {list(SDD_FLAGS)})")


def parse_sdd(
    path,
    keep_classes: Iterable[str] = DEFAULT_KEEP_CLASSES,
    drop_flags: Iterable[str] = DEFAULT_DROP_FLAGS,
    *,
    frame_stride: int = DEFAULT_FRAME_STRIDE,
    dt: float = DEFAULT_DT,
) -> List[Trajectory]:
    path = Path(path)
    keep_classes = frozenset(keep_classes)
    drop_flags = frozenset(drop_flags)
    _validate_filters(keep_classes, drop_flags)
    if frame_stride < 1:
        raise ConfigError(f"frame_stride must be >= 1, got {frame_stride}")

    df = read_annotation_table(path, SDD_COLUMNS, numeric=SDD_NUMERIC)
    for col in ("agent_id", "frame"):
        require_integral(df, col, path)
    df["label"] = df["label"].str.strip('"')

    unknown = sorted(set(df["label"]) - set(SDD_LABELS))
    if unknown:
        raise DataError(f"{path}: unknown SDD label(s) {unknown}")

    total = len(df)
    keep = df["label"].isin(keep_classes)
    for flag in sorted(drop_flags):
        keep &= df[flag] == 0
    frames = df["frame"].to_numpy().astype(np.int64)
    keep &= frames % frame_stride == 0
    df = df[keep.to_numpy()]

    df = df.assign(
        step=df["frame"].astype(np.int64) // frame_stride,
        cx=(df["xmin"] + df["xmax"]) / 2.0,
        cy=(df["ymin"] + df["ymax"]) / 2.0,
    )
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
                label=str(rows["label"].iloc[0]),
                steps=steps,
                points=rows[["cx", "cy"]].to_numpy(),
                units="pixels",
                dt=dt,
            )
        )

    logger.info(
        "Parsed %s: kept %d of %d rows, %d agents (classes=%s, dropped flags=%s)",
        path.name, len(df), total, len(trajectories), sorted(keep_classes), sorted(drop_flags),
    )
    return trajectories
