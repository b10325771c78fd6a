"""
===============================================================================
SPLITS - LEAVE-ONE-OUT FOLDS, VALIDATION HOLDOUT, RANDOM SPLITS
===============================================================================

Purpose:
    - loocv_splits(): one fold per dataset, trained on the others
    - holdout_validation(): seeded validation subset of a training set
    - random_split(): per-dataset seeded train/test split (single-recording runs)
    - resolve_splits(): maps a CLI split name onto SplitPlans ("all" = every
      scene as test set, for evaluation-only runs)

Key behaviors:
    - SplitPlan checks train / test / validation disjointness by scene id.
    - Selected subsets keep their original order, so a fixed seed gives a fixed
      scene sequence.

===============================================================================
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from data.trajectory import Scene
from util.errors_util import ConfigError, ContractError

logger = logging.getLogger("Splits")

VALIDATION_FRACTION = 0.1


@dataclass
class SplitPlan:
    name: str
    train: List[Scene]
    test: List[Scene]
    validation: List[Scene] = field(default_factory=list)

    def __post_init__(self):
        train_ids = {s.scene_id for s in self.train}
        test_ids = {s.scene_id for s in self.test}
        val_ids = {s.scene_id for s in self.validation}
        if len(train_ids) != len(self.train) or len(test_ids) != len(self.test):
            raise ContractError(f"split '{self.name}' repeats scene ids")
        overlap = (train_ids & test_ids) | (train_ids & val_ids) | (test_ids & val_ids)
        if overlap:
            raise ContractError(
                f"split '{self.name}' is not disjoint ({len(overlap)} shared scenes, e.g. {sorted(overlap)[0]})"
            )

    def summary(self) -> Dict[str, int]:
        return {"train": len(self.train), "validation": len(self.validation), "test": len(self.test)}


def loocv_splits(scenes_by_dataset: Dict[str, Sequence[Scene]]) -> List[SplitPlan]:
    """One fold per dataset: test on it, train on every other dataset."""
    names = list(scenes_by_dataset)
    if len(names) < 2:
        raise ConfigError(f"leave-one-out needs >= 2 datasets, got {names}")
    plans = []
    for held_out in names:
        train = [s for name in names if name != held_out for s in scenes_by_dataset[name]]
        test = list(scenes_by_dataset[held_out])
        if not test:
            logger.warning("Fold '%s' has no test scenes", held_out)
        plans.append(SplitPlan(name=held_out, train=train, test=test))
    return plans


def holdout_validation(
    scenes: Sequence[Scene], fraction: float = VALIDATION_FRACTION, seed: int = 0
) -> Tuple[List[Scene], List[Scene]]:
    if not 0.0 <= fraction < 1.0:
        raise ConfigError(f"validation fraction must be in [0, 1), got {fraction}")
    n_val = int(len(scenes) * fraction)
    if n_val == 0:
        return list(scenes), []
    rng = np.random.default_rng(seed)
    chosen = np.zeros(len(scenes), dtype=bool)
    chosen[rng.permutation(len(scenes))[:n_val]] = True
    train = [s for s, c in zip(scenes, chosen) if not c]
    val = [s for s, c in zip(scenes, chosen) if c]
    return train, val


def random_split(
    scenes_by_dataset: Dict[str, Sequence[Scene]],
    test_fraction: float = 0.2,
    seed: int = 0,
    name: str = "random",
) -> SplitPlan:
    """Per-dataset seeded split; each dataset contributes round(n * fraction) test scenes."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for dataset in scenes_by_dataset:
        scenes = list(scenes_by_dataset[dataset])
        n_test = int(round(len(scenes) * test_fraction))
        chosen = np.zeros(len(scenes), dtype=bool)
        chosen[rng.permutation(len(scenes))[:n_test]] = True
        train.extend(s for s, c in zip(scenes, chosen) if not c)
        test.extend(s for s, c in zip(scenes, chosen) if c)
    return SplitPlan(name=name, train=train, test=test)


def resolve_splits(
    scenes_by_dataset: Dict[str, Sequence[Scene]],
    split: str,
    *,
    seed: int = 0,
    test_fraction: float = 0.2,
) -> List[SplitPlan]:
    """
    Split names:
        "loocv"      every leave-one-out fold
        <dataset>    the leave-one-out fold holding out that dataset
        "random"     a single per-dataset random split
        "all"        every scene as test set (evaluation only)
    """
    if split == "all":
        return [SplitPlan(name="all", train=[], test=[s for name in scenes_by_dataset for s in scenes_by_dataset[name]])]
    if split == "random":
        return [random_split(scenes_by_dataset, test_fraction, seed)]
    if split == "loocv":
        return loocv_splits(scenes_by_dataset)
    if split in scenes_by_dataset:
        return [p for p in loocv_splits(scenes_by_dataset) if p.name == split]
    raise ConfigError(
        f"unknown split '{split}' (expected 'loocv', 'random', 'all' or one of {sorted(scenes_by_dataset)})"
    )
