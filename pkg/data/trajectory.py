"""
===============================================================================
TRAJECTORY / SCENE TYPES
===============================================================================

Purpose:
    Plain containers shared by the parsers, the scene builder, the geometry
    helpers and the model:

      - Trajectory: ordered 2-D positions of one agent on the Δt grid
      - Scene: one prediction instance (main agent observed/future split,
        neighbor observed tracks, optional BEV image)

Key behaviors:
    - Positions live on an integer step grid; timestamps = step * dt.
    - `frame` records the coordinate system: "world" (dataset units) or
      "agent" (agent-centric, produced by util.transform_util).
    - Neighbor tracks always cover the scene's observed steps; steps the
      neighbor was not seen carry mask == False (positions padded).

===============================================================================
"""

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Dict, List, Optional

import numpy as np

from util.errors_util import ContractError, DataError

if TYPE_CHECKING:
    from util.image_util import BevImage

UNITS = ("meters", "pixels")
FRAMES = ("world", "agent")

DEFAULT_DT = 0.4
DEFAULT_T_OBS = 8
DEFAULT_T_PRED = 12


@dataclass
class Trajectory:
    agent_id: Any
    label: str
    steps: np.ndarray
    points: np.ndarray
    units: str = "meters"
    dt: float = DEFAULT_DT
    frame: str = "world"
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64).reshape(-1)
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(self.steps) != len(self.points):
            raise DataError(
                f"agent {self.agent_id}: {len(self.steps)} steps but {len(self.points)} points"
            )
        if len(self.steps) > 1 and np.any(np.diff(self.steps) <= 0):
            raise DataError(f"agent {self.agent_id}: timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.points)):
            raise DataError(f"agent {self.agent_id}: non-finite coordinates")
        if self.units not in UNITS:
            raise DataError(f"unknown units '{self.units}' (expected {UNITS})")
        if self.frame not in FRAMES:
            raise DataError(f"unknown frame '{self.frame}' (expected {FRAMES})")
        if self.mask is None:
            self.mask = np.ones(len(self.steps), dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool).reshape(-1)
            if len(self.mask) != len(self.steps):
                raise DataError(f"agent {self.agent_id}: mask length does not match steps")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def timestamps(self) -> np.ndarray:
        return self.steps * self.dt

    def is_contiguous(self) -> bool:
        return len(self.steps) < 2 or bool(np.all(np.diff(self.steps) == 1))

    def slice_steps(self, start: int, stop: int) -> "Trajectory":
        """Sub-trajectory with start <= step < stop."""
        keep = (self.steps >= start) & (self.steps < stop)
        return replace(
            self,
            steps=self.steps[keep],
            points=self.points[keep],
            mask=self.mask[keep],
        )

    def with_points(self, points: np.ndarray, frame: str) -> "Trajectory":
        return replace(self, points=np.asarray(points, dtype=np.float64), frame=frame,
                       steps=self.steps.copy(), mask=self.mask.copy())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "label": self.label,
            "steps": self.steps.tolist(),
            "points": self.points.tolist(),
            "units": self.units,
            "dt": self.dt,
            "frame": self.frame,
            "mask": self.mask.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Trajectory":
        return cls(**d)


@dataclass
class Scene:
    scene_id: str
    dataset: str
    observed: Trajectory
    future: Optional[Trajectory]
    neighbors: List[Trajectory] = field(default_factory=list)
    image: Optional["BevImage"] = None
    t_obs: int = DEFAULT_T_OBS
    t_pred: int = DEFAULT_T_PRED

    def __post_init__(self):
        if len(self.observed) != self.t_obs:
            raise ContractError(
                f"scene {self.scene_id}: observed length {len(self.observed)} != {self.t_obs}"
            )
        if self.future is not None and len(self.future) != self.t_pred:
            raise ContractError(
                f"scene {self.scene_id}: future length {len(self.future)} != {self.t_pred}"
            )
        for n in self.neighbors:
            if n.agent_id == self.observed.agent_id:
                raise ContractError(f"scene {self.scene_id}: main agent listed as its own neighbor")
            if not np.array_equal(n.steps, self.observed.steps):
                raise ContractError(
                    f"scene {self.scene_id}: neighbor {n.agent_id} is not on the observed window"
                )

    @property
    def units(self) -> str:
        return self.observed.units

    @property
    def label(self) -> str:
        return self.observed.label

    def without_future(self) -> "Scene":
        return replace(self, future=None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scene_id": self.scene_id,
            "dataset": self.dataset,
            "observed": self.observed.to_dict(),
            "future": None if self.future is None else self.future.to_dict(),
            "neighbors": [n.to_dict() for n in self.neighbors],
            "image": None if self.image is None else self.image.to_dict(),
            "t_obs": self.t_obs,
            "t_pred": self.t_pred,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Scene":
        from util.image_util import BevImage

        return cls(
            scene_id=d["scene_id"],
            dataset=d["dataset"],
            observed=Trajectory.from_dict(d["observed"]),
            future=None if d["future"] is None else Trajectory.from_dict(d["future"]),
            neighbors=[Trajectory.from_dict(n) for n in d["neighbors"]],
            image=None if d["image"] is None else BevImage.from_dict(d["image"]),
            t_obs=d["t_obs"],
            t_pred=d["t_pred"],
        )
