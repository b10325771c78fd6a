"""
===============================================================================
SYNTHETIC SCENES - STRAIGHT, CURVED AND STATIC AGENTS
===============================================================================

Purpose:
    Deterministic fixtures for tests, the gradient check, and the overfit /
    ordering checks:

      - straight_points(): constant velocity (linear extrapolation is exact)
      - curved_points(): constant speed with a constant turn rate
      - static_points(): agent standing still
      - unique_image(): BEV image whose pixels are all distinct
      - synthetic_scenes(): seeded mix of the above with 0..max_neighbors
        neighbors and an optional image per scene

===============================================================================
"""

import math
from typing import List, Optional, Sequence

import numpy as np

from data.trajectory import DEFAULT_DT, DEFAULT_T_OBS, DEFAULT_T_PRED, Scene, Trajectory
from util.errors_util import ConfigError
from util.image_util import BevImage

KINDS = ("straight", "curved", "static")


def straight_points(n: int, start, velocity) -> np.ndarray:
    k = np.arange(n, dtype=np.float64)[:, None]
    return np.asarray(start, dtype=np.float64) + k * np.asarray(velocity, dtype=np.float64)


def curved_points(n: int, start, speed: float, heading: float, turn_rate: float) -> np.ndarray:
    headings = heading + turn_rate * np.arange(n - 1, dtype=np.float64)
    steps = speed * np.stack([np.cos(headings), np.sin(headings)], axis=1)
    return np.asarray(start, dtype=np.float64) + np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])


def static_points(n: int, start) -> np.ndarray:
    return np.tile(np.asarray(start, dtype=np.float64), (n, 1))


def unique_image(height: int, width: int, meters_per_pixel: float = 1.0, origin=(0.0, 0.0)) -> BevImage:
    """Channel 0 = row, channel 1 = col, channel 2 = (row * width + col) mod 251."""
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    pixels = np.stack([rows, cols, (rows * width + cols) % 251], axis=-1).astype(np.float64)
    return BevImage(pixels, meters_per_pixel, origin)


def _track_points(kind: str, n: int, rng: np.random.Generator, start, *, turn_rate: Optional[float] = None) -> np.ndarray:
    speed = rng.uniform(0.3, 0.6)
    heading = rng.uniform(-math.pi, math.pi)
    if kind == "straight":
        return straight_points(n, start, (speed * math.cos(heading), speed * math.sin(heading)))
    if kind == "curved":
        if turn_rate is None:
            turn_rate = rng.choice([-1.0, 1.0]) * rng.uniform(0.08, 0.15)
        return curved_points(n, start, speed, heading, turn_rate)
    if kind == "static":
        return static_points(n, start)
    raise ConfigError(f"unknown synthetic kind '{kind}' (expected {KINDS})")


def synthetic_scene(
    kind: str,
    rng: np.random.Generator,
    *,
    scene_id: str = "synthetic/0/0",
    dataset: str = "synthetic",
    n_neighbors: int = 0,
    with_image: bool = False,
    image_size: int = 32,
    t_obs: int = DEFAULT_T_OBS,
    t_pred: int = DEFAULT_T_PRED,
    dt: float = DEFAULT_DT,
    turn_rate: Optional[float] = None,
) -> Scene:
    total = t_obs + t_pred
    start = rng.uniform(-5.0, 5.0, size=2)
    points = _track_points(kind, total, rng, start, turn_rate=turn_rate)
    steps = np.arange(total, dtype=np.int64)
    main = Trajectory(agent_id=0, label="Pedestrian", steps=steps, points=points, dt=dt)

    neighbors = []
    for j in range(n_neighbors):
        offset = rng.uniform(-3.0, 3.0, size=2)
        n_kind = KINDS[int(rng.integers(len(KINDS)))]
        n_points = _track_points(n_kind, t_obs, rng, points[0] + offset)
        mask = np.ones(t_obs, dtype=bool)
        # some neighbors enter the window late
        late = int(rng.integers(0, t_obs // 2 + 1)) if j % 2 else 0
        if late:
            n_points[:late] = n_points[late]
            mask[:late] = False
        neighbors.append(
            Trajectory(agent_id=j + 1, label="Pedestrian", steps=steps[:t_obs], points=n_points, dt=dt, mask=mask)
        )

    image = None
    if with_image:
        mpp = 0.25
        last = points[t_obs - 1]
        origin = (last[0] - image_size / 2 * mpp, last[1] - image_size / 2 * mpp)
        image = unique_image(image_size, image_size, mpp, origin)

    return Scene(
        scene_id=scene_id,
        dataset=dataset,
        observed=main.slice_steps(0, t_obs),
        future=main.slice_steps(t_obs, total),
        neighbors=neighbors,
        image=image,
        t_obs=t_obs,
        t_pred=t_pred,
    )


def synthetic_scenes(
    count: int,
    *,
    seed: int = 0,
    kinds: Sequence[str] = ("straight", "curved"),
    max_neighbors: int = 3,
    min_neighbors: int = 0,
    with_image: bool = False,
    image_size: int = 32,
    dataset: str = "synthetic",
    turn_rate: Optional[float] = None,
    t_obs: int = DEFAULT_T_OBS,
    t_pred: int = DEFAULT_T_PRED,
) -> List[Scene]:
    """Seeded scene list; kinds cycle in order, neighbor counts are drawn per scene."""
    if count < 0 or min_neighbors < 0 or max_neighbors < min_neighbors:
        raise ConfigError("bad synthetic scene counts")
    rng = np.random.default_rng(seed)
    scenes = []
    for i in range(count):
        scenes.append(
            synthetic_scene(
                kinds[i % len(kinds)],
                rng,
                scene_id=f"{dataset}/{i}/0",
                dataset=dataset,
                n_neighbors=int(rng.integers(min_neighbors, max_neighbors + 1)),
                with_image=with_image,
                image_size=image_size,
                turn_rate=turn_rate,
                t_obs=t_obs,
                t_pred=t_pred,
            )
        )
    return scenes
