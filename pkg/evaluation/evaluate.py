"""
===============================================================================
EVALUATION - PER-SCENE METRIC REPORTS FOR MODELS AND BASELINES
===============================================================================

Purpose:
    - score(): metrics for world-frame predicted trajectories of a scene list
    - evaluate(): inference-mode model or deterministic baseline over scenes
    - load_predictor(): checkpoint -> TrajectoryPredictor, checking that the
      stored config matches the parameters (and an expected config, if given)

MetricReport:
    One SceneRecord per scene in input order, holding ADE, FDE and the final
    error vector (prediction - truth) in the agent-centric frame: x along the
    last observed heading, y across it. Fold means are recomputed from the
    records; units follow the dataset (meters for ETH/UCY, pixels for SDD).

===============================================================================
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from data.trajectory import Scene
from evaluation.baselines import baseline_for
from evaluation.metrics import ade, fde
from model.config import ModelConfig
from model.predictor import TrajectoryPredictor, check_param_shapes
from numerics.checkpoint_util import load_checkpoint
from numerics.ops_util import dtype_for
from util.errors_util import ConfigError, ContractError, EmptyMetricError, LoadError
from util.transform_util import heading_transform, transform_points

logger = logging.getLogger("Evaluate")


@dataclass
class SceneRecord:
    scene_id: str
    dataset: str
    units: str
    ade: float
    fde: float
    final_dx: float
    final_dy: float


@dataclass
class MetricReport:
    method: str
    fold: str
    records: List[SceneRecord] = field(default_factory=list)
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.records:
            raise EmptyMetricError(f"report '{self.method}/{self.fold}' has no scenes")

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def units(self) -> str:
        units = sorted({r.units for r in self.records})
        return units[0] if len(units) == 1 else "mixed"

    @property
    def ade(self) -> float:
        return float(np.mean([r.ade for r in self.records]))

    @property
    def fde(self) -> float:
        return float(np.mean([r.fde for r in self.records]))

    def final_errors(self) -> np.ndarray:
        return np.array([[r.final_dx, r.final_dy] for r in self.records], dtype=np.float64)

    def per_dataset(self) -> Dict[str, Tuple[float, float, int]]:
        out = {}
        for name in sorted({r.dataset for r in self.records}):
            rows = [r for r in self.records if r.dataset == name]
            out[name] = (float(np.mean([r.ade for r in rows])), float(np.mean([r.fde for r in rows])), len(rows))
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "fold": self.fold,
            "units": self.units,
            "n": self.n,
            "ade": self.ade,
            "fde": self.fde,
            "seed": self.seed,
            "records": [asdict(r) for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "MetricReport":
        return cls(
            method=d["method"],
            fold=d["fold"],
            records=[SceneRecord(**r) for r in d["records"]],
            seed=d.get("seed"),
        )


def score(
    scenes: Sequence[Scene],
    world_predictions: Sequence[np.ndarray],
    *,
    method: str,
    fold: str = "",
    seed: Optional[int] = None,
) -> MetricReport:
    """Score world-frame [T_pred, 2] predictions against each scene's future."""
    if len(scenes) != len(world_predictions):
        raise ContractError(f"{len(scenes)} scenes but {len(world_predictions)} predictions")
    if not scenes:
        raise EmptyMetricError("no scenes to evaluate")
    records = []
    for scene, pred in zip(scenes, world_predictions):
        if scene.future is None:
            raise ContractError(f"scene {scene.scene_id} has no ground-truth future")
        t = heading_transform(scene.observed)
        pred_agent = transform_points(t, np.asarray(pred, dtype=np.float64))
        gt_agent = transform_points(t, scene.future.points)
        dx, dy = pred_agent[-1] - gt_agent[-1]
        records.append(
            SceneRecord(
                scene_id=scene.scene_id,
                dataset=scene.dataset,
                units=scene.units,
                ade=ade(pred_agent[None], gt_agent[None]),
                fde=fde(pred_agent[None], gt_agent[None]),
                final_dx=float(dx),
                final_dy=float(dy),
            )
        )
    report = MetricReport(method=method, fold=fold, records=records, seed=seed)
    logger.info(
        "%s on '%s': ADE %.4f / FDE %.4f %s over %d scenes",
        method, fold, report.ade, report.fde, report.units, report.n,
    )
    return report


def evaluate(
    scenes: Sequence[Scene],
    model: Optional[TrajectoryPredictor] = None,
    *,
    baseline: Optional[str] = None,
    fold: str = "",
    batch_size: int = 32,
    seed: Optional[int] = None,
    **collate_kwargs,
) -> MetricReport:
    """Evaluate exactly one of `model` (inference mode) or a named baseline."""
    if (model is None) == (baseline is None):
        raise ConfigError("evaluate needs exactly one of a model or a baseline name")
    if not scenes:
        raise EmptyMetricError(f"fold '{fold}' has no test scenes")
    if baseline is not None:
        predict = baseline_for(baseline)
        world = [predict(s.observed, s.t_pred) for s in scenes]
        method = baseline
    else:
        stripped = [s.without_future() for s in scenes]
        preds = model.predict(stripped, "inference", batch_size=batch_size, **collate_kwargs)
        world = [p.world_trajectory() for p in preds]
        method = "model"
    return score(scenes, world, method=method, fold=fold, seed=seed)


def load_predictor(
    path,
    precision: str = "check",
    expected_config: Optional[ModelConfig] = None,
) -> Tuple[TrajectoryPredictor, Dict[str, Any]]:
    params, metadata = load_checkpoint(path, dtype_for(precision))
    if "model_config" not in metadata:
        raise LoadError(f"{path}: checkpoint metadata has no model_config")
    try:
        config = ModelConfig.from_dict(metadata["model_config"])
    except (ConfigError, TypeError) as exc:
        raise LoadError(f"{path}: stored model config is invalid ({exc})")
    if expected_config is not None and expected_config != config:
        raise LoadError(f"{path}: checkpoint was trained with a different model config")
    try:
        check_param_shapes(params, config)
    except ConfigError as exc:
        raise LoadError(f"{Path(path)}: {exc}")
    return TrajectoryPredictor(config, params), metadata
