"""
Scene cache: the prepared scenes of every dataset in one pickle container.

    {"format": "trajpred-scenes", "version": 1,
     "data_config": {...},
     "scenes": {dataset: [scene.to_dict(), ...], ...}}

Scenes are stored as plain dicts and numpy arrays so the file does not depend
on class layouts; identical inputs produce byte-identical files.
"""

import logging
import pickle
from pathlib import Path
from typing import Any, Dict, List, Tuple

from data.trajectory import Scene
from util.errors_util import LoadError, PathError

logger = logging.getLogger("SceneCache")

CACHE_FORMAT = "trajpred-scenes"
CACHE_VERSION = 1
PICKLE_PROTOCOL = 4


def save_scene_cache(path, scenes_by_dataset: Dict[str, List[Scene]], data_config: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "data_config": dict(sorted(data_config.items())),
        "scenes": {
            name: [s.to_dict() for s in scenes_by_dataset[name]]
            for name in sorted(scenes_by_dataset)
        },
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(pickle.dumps(payload, protocol=PICKLE_PROTOCOL))
    tmp.replace(path)
    logger.info(
        "Wrote scene cache %s (%d scenes)", path, sum(len(v) for v in scenes_by_dataset.values())
    )
    return path


def load_scene_cache(path) -> Tuple[Dict[str, List[Scene]], Dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise PathError(path)
    try:
        payload = pickle.loads(path.read_bytes())
    except Exception as exc:
        raise LoadError(f"{path}: unreadable scene cache ({exc})")
    if not isinstance(payload, dict) or payload.get("format") != CACHE_FORMAT:
        raise LoadError(f"{path}: not a scene cache")
    if payload.get("version") != CACHE_VERSION:
        raise LoadError(f"{path}: unsupported scene cache version {payload.get('version')}")
    if not isinstance(payload.get("scenes"), dict) or "data_config" not in payload:
        raise LoadError(f"{path}: scene cache is missing its scenes or data_config")
    scenes = {
        name: [Scene.from_dict(d) for d in dicts] for name, dicts in payload["scenes"].items()
    }
    return scenes, payload["data_config"]
