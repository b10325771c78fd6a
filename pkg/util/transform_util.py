"""
===============================================================================
AGENT-CENTRIC TRANSFORMS - RigidTransform2D AND TRAJECTORY NORMALIZATION
===============================================================================

Purpose:
    Builds and applies the rigid transform that takes dataset coordinates into
    the main agent's frame:

      - origin at the agent's last observed position
      - +x axis along the agent's last heading

Key behaviors:
    - heading_transform(): derives the transform from an observed trajectory.
      Zero displacement between the last two points falls back to the most
      recent nonzero displacement; a fully static window keeps the identity
      rotation.
    - apply_transform(): maps every point p -> R p + t via shapely's affine
      transform on a MultiPoint (vertex order and timestamps preserved).
    - invert()/compose(): exact closed forms (R^T, -R^T t).
    - path_length(): shapely LineString length, used for crop-size planning.

Notes:
    - Units are untouched: meters stay meters, pixels stay pixels.

===============================================================================
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import shapely
from shapely.affinity import affine_transform
from shapely.geometry import LineString, MultiPoint

from data.trajectory import Trajectory
from util.errors_util import ContractError, DimensionError

STATIC_EPS = 1e-12


# =============================================================================
# TRANSFORM TYPE
# =============================================================================
@dataclass(frozen=True)
class RigidTransform2D:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if rot.shape != (2, 2) or trans.shape != (2,):
            raise DimensionError(f"rigid transform needs 2x2 rotation and 2-vector, got {rot.shape}/{trans.shape}")
        if not np.allclose(rot @ rot.T, np.eye(2), atol=1e-9) or abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ContractError("rotation must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "RigidTransform2D":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_angle(cls, theta: float, translation: Sequence[float] = (0.0, 0.0)) -> "RigidTransform2D":
        """Counter-clockwise rotation by theta (radians) followed by a translation."""
        c, s = math.cos(theta), math.sin(theta)
        return cls(np.array([[c, -s], [s, c]]), np.asarray(translation, dtype=np.float64))

    @property
    def angle(self) -> float:
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform2D":
        return cls(np.asarray(d["rotation"]), np.asarray(d["translation"]))


def invert(t: RigidTransform2D) -> RigidTransform2D:
    rt = t.rotation.T
    return RigidTransform2D(rt, -rt @ t.translation)


def compose(outer: RigidTransform2D, inner: RigidTransform2D) -> RigidTransform2D:
    """Transform equivalent to applying `inner` first, then `outer`."""
    return RigidTransform2D(
        outer.rotation @ inner.rotation,
        outer.rotation @ inner.translation + outer.translation,
    )


def transform_points(t: RigidTransform2D, points: np.ndarray) -> np.ndarray:
    """Apply t to an array of points [..., 2]."""
    points = np.asarray(points, dtype=np.float64)
    return points @ t.rotation.T + t.translation


# =============================================================================
# HEADING TRANSFORM
# =============================================================================
def _heading_vector(points: np.ndarray) -> np.ndarray:
    # most recent nonzero displacement, scanning back from the last pair
    for i in range(len(points) - 1, 0, -1):
        d = points[i] - points[i - 1]
        if math.hypot(d[0], d[1]) > STATIC_EPS:
            return d
    return np.array([1.0, 0.0])


def heading_transform(observed: Trajectory) -> RigidTransform2D:
    """
    Build T_{o->m}: last observed point -> (0, 0), heading -> +x axis.

    Parameters
    ----------
    observed : Trajectory
        The main agent's observed window (>= 2 points), in world coordinates.
    """
    if len(observed) < 2:
        raise ContractError(f"heading_transform needs >= 2 observed points, got {len(observed)}")
    points = observed.points
    heading = _heading_vector(points)
    theta = math.atan2(heading[1], heading[0])
    c, s = math.cos(theta), math.sin(theta)
    # rotation by -theta
    rotation = np.array([[c, s], [-s, c]])
    translation = -rotation @ points[-1]
    return RigidTransform2D(rotation, translation)


# =============================================================================
# APPLY
# =============================================================================
def apply_transform(t: RigidTransform2D, traj: Trajectory, frame: str = None) -> Trajectory:
    """
    Map every point of `traj` through t; steps, mask and labels are preserved.

    `frame` defaults to flipping world <-> agent.
    """
    if frame is None:
        frame = "agent" if traj.frame == "world" else "world"
    if len(traj) == 0:
        return traj.with_points(traj.points.copy(), frame)
    (a, b), (d, e) = t.rotation
    xoff, yoff = t.translation
    moved = affine_transform(MultiPoint(traj.points.tolist()), [a, b, d, e, xoff, yoff])
    coords = shapely.get_coordinates(moved)
    return traj.with_points(coords, frame)


def path_length(traj: Trajectory) -> float:
    """Polyline length of the trajectory in its own units."""
    if len(traj) < 2:
        return 0.0
    return float(LineString(traj.points.tolist()).length)
