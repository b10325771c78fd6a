"""
===============================================================================
PREPARE - RAW ANNOTATIONS -> SCENE CACHE
===============================================================================

Purpose:
    Parses every dataset root, builds fixed-horizon scenes and writes
    <out>/scenes.pkl together with a printed summary.

Dataset root layout (one directory per dataset; the directory name, lower
cased, is the dataset tag used by the leave-one-out folds):

    eth_ucy:   <root>/*.txt            one annotation file per recording
               <root>/H.txt            optional 3x3 image -> world homography
               <root>/reference.png    optional BEV image (DataConfig
                                       meters_per_pixel, origin (0, 0))
    sdd:       <root>/**/annotations.txt      one file per video
               <same dir>/reference.(png|jpg|bev)  optional BEV image in pixels

Summary:
    scenes / agents per dataset and the longest observed + future path length
    per agent class (used to size per-class crops).

===============================================================================
"""

import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from data.config import DataConfig
from data.eth_ucy_parser import load_homography, parse_eth_ucy
from data.scene_builder import build_scenes
from data.scene_cache import save_scene_cache
from data.sdd_parser import parse_sdd
from data.trajectory import Scene, Trajectory
from init_config import RunConfig, write_run_record
from util.errors_util import PathError
from util.image_util import BevImage, dump_crop, read_bev_image, rotate_crop
from util.transform_util import heading_transform, path_length

logger = logging.getLogger("Prepare")

CACHE_NAME = "scenes.pkl"
HOMOGRAPHY_NAME = "H.txt"
SDD_ANNOTATIONS = "annotations.txt"
IMAGE_NAMES = ("reference.png", "reference.jpg", "reference.bev")


def find_recordings(root: Path, fmt: str) -> List[Path]:
    if fmt == "sdd":
        return sorted(root.rglob(SDD_ANNOTATIONS))
    return sorted(p for p in root.glob("*.txt") if p.name != HOMOGRAPHY_NAME)


def find_image(directory: Path) -> Optional[Path]:
    for name in IMAGE_NAMES:
        if (directory / name).is_file():
            return directory / name
    return None


def recording_name(root: Path, path: Path, fmt: str) -> str:
    if fmt == "sdd":
        rel = path.parent.relative_to(root).as_posix()
        return "" if rel == "." else rel
    return path.stem


def parse_recording(path: Path, fmt: str, data: DataConfig, homography) -> List[Trajectory]:
    if fmt == "sdd":
        return parse_sdd(
            path,
            data.sdd_keep_classes,
            data.sdd_drop_flags,
            frame_stride=data.sdd_frame_stride,
            dt=data.dt,
        )
    return parse_eth_ucy(
        path,
        homography,
        frame_step=data.eth_frame_step or None,
        dt=data.dt,
    )


def prepare_scenes(roots, fmt: str, data: DataConfig) -> Tuple[Dict[str, List[Scene]], Dict[str, int]]:
    """Parse and window every root; returns (scenes by dataset, agent counts)."""
    roots = [Path(r) for r in roots]
    plans = {}
    missing = []
    for root in roots:
        recordings = find_recordings(root, fmt) if root.is_dir() else []
        if not recordings:
            pattern = f"**/{SDD_ANNOTATIONS}" if fmt == "sdd" else "*.txt"
            missing.append(root / pattern)
        plans[root] = recordings
    if missing:
        raise PathError(missing)

    scenes_by_dataset: Dict[str, List[Scene]] = {}
    agents: Dict[str, int] = {}
    for root in sorted(roots, key=lambda r: r.name.lower()):
        dataset = root.name.lower()
        homography = None
        if fmt == "eth_ucy" and (root / HOMOGRAPHY_NAME).is_file():
            homography = load_homography(root / HOMOGRAPHY_NAME)
        scenes: List[Scene] = []
        n_agents = 0
        for path in plans[root]:
            tracks = parse_recording(path, fmt, data, homography)
            n_agents += len(tracks)
            image_path = find_image(path.parent)
            image = None
            if image_path is not None:
                mpp = 1.0 if fmt == "sdd" else data.meters_per_pixel
                image = read_bev_image(image_path, mpp)
            scenes.extend(
                build_scenes(
                    tracks,
                    dataset,
                    t_obs=data.t_obs,
                    t_pred=data.t_pred,
                    stride=data.scene_stride,
                    image=image,
                    recording=recording_name(root, path, fmt),
                )
            )
        scenes_by_dataset.setdefault(dataset, []).extend(scenes)
        agents[dataset] = agents.get(dataset, 0) + n_agents
    return scenes_by_dataset, agents


def longest_paths(scenes_by_dataset: Dict[str, List[Scene]]) -> Dict[str, float]:
    """Longest observed + future path per agent class."""
    longest = defaultdict(float)
    for scenes in scenes_by_dataset.values():
        for scene in scenes:
            full = Trajectory(
                agent_id=scene.observed.agent_id,
                label=scene.label,
                steps=np.concatenate([scene.observed.steps, scene.future.steps]),
                points=np.vstack([scene.observed.points, scene.future.points]),
                units=scene.units,
                dt=scene.observed.dt,
            )
            longest[scene.label] = max(longest[scene.label], path_length(full))
    return dict(sorted(longest.items()))


def dump_scene_crops(scenes: List[Scene], out_dir: Path, count: int, sides: Dict[str, int], default_side: int,
                     sampling: str) -> List[Path]:
    written = []
    for scene in scenes:
        if len(written) >= count:
            break
        if scene.image is None:
            continue
        side = sides.get(scene.label, default_side)
        crop: BevImage = rotate_crop(scene.image, heading_transform(scene.observed), side, sampling=sampling)
        name = scene.scene_id.replace("/", "_") + ".png"
        written.append(dump_crop(crop, out_dir / "crops" / name))
    return written


def run_prepare_app(run_config: RunConfig) -> Path:
    data = run_config.data()
    out_dir = run_config.out_dir
    scenes_by_dataset, agents = prepare_scenes(run_config.dataset_roots, run_config.format, data)
    cache = save_scene_cache(out_dir / CACHE_NAME, scenes_by_dataset, data.to_dict())
    write_run_record(run_config, out_dir, data_config=data.to_dict())

    if run_config.dump_crops:
        all_scenes = [s for name in sorted(scenes_by_dataset) for s in scenes_by_dataset[name]]
        dumped = dump_scene_crops(
            all_scenes, out_dir, run_config.dump_crops, data.crop_sizes, run_config.model().crop_size, data.sampling
        )
        logger.info("Dumped %d crops under %s", len(dumped), out_dir / "crops")

    summary = {
        "cache": str(cache),
        "format": run_config.format,
        "datasets": {
            name: {"scenes": len(scenes_by_dataset[name]), "agents": agents.get(name, 0)}
            for name in sorted(scenes_by_dataset)
        },
        "total_scenes": sum(len(v) for v in scenes_by_dataset.values()),
        "longest_path_by_class": longest_paths(scenes_by_dataset),
        "seed": run_config.effective_seed(),
    }
    (out_dir / "prepare_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    for name, counts in summary["datasets"].items():
        print(f"{name}: {counts['scenes']} scenes from {counts['agents']} agents")
    for label, length in summary["longest_path_by_class"].items():
        print(f"longest {label} path: {length:.2f}")
    print(f"total: {summary['total_scenes']} scenes -> {cache}")
    return cache
