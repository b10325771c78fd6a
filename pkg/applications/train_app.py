"""
TRAIN - fit one model per selected fold of a scene cache.

Outputs land in <out>/<fold>/ (train_log.jsonl, best.ckpt, final.ckpt,
train_report.json) plus <out>/run_config.json.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Tuple

from data.config import DataConfig
from data.scene_cache import load_scene_cache
from data.splits import resolve_splits
from data.trajectory import Scene
from init_config import RunConfig, write_run_record
from model.config import ModelConfig
from training.trainer import TrainReport, train
from util.errors_util import ConfigError

logger = logging.getLogger("TrainApp")


def load_run_scenes(run_config: RunConfig) -> Tuple[Dict[str, List[Scene]], DataConfig]:
    if run_config.scenes is None:
        raise ConfigError(f"'{run_config.command}' needs --scenes (a cache written by prepare)")
    scenes, data_dict = load_scene_cache(run_config.scenes)
    return scenes, DataConfig.from_dict(data_dict)


def check_horizons(model_config: ModelConfig, data: DataConfig) -> None:
    if (model_config.t_obs, model_config.t_pred) != (data.t_obs, data.t_pred):
        raise ConfigError(
            f"model horizons {model_config.t_obs}/{model_config.t_pred} do not match "
            f"the scene cache {data.t_obs}/{data.t_pred}"
        )


def run_train_app(run_config: RunConfig) -> Dict[str, TrainReport]:
    scenes_by_dataset, data = load_run_scenes(run_config)
    model_config = run_config.model()
    train_config = run_config.train()
    check_horizons(model_config, data)

    plans = resolve_splits(
        scenes_by_dataset, run_config.split, seed=train_config.seed, test_fraction=data.test_fraction
    )
    out_dir = run_config.out_dir
    write_run_record(
        run_config,
        out_dir,
        model_config=model_config.to_dict(),
        train_config=train_config.to_dict(),
        data_config=data.to_dict(),
    )

    reports = {}
    for plan in plans:
        logger.info("Fold '%s': %s", plan.name, plan.summary())
        fold_dir = Path(out_dir) / plan.name
        report = train(
            plan,
            model_config,
            train_config,
            fold_dir,
            sampling=data.sampling,
            crop_sizes=data.crop_sizes,
            metadata={"run_settings": run_config.settings(), "fold": plan.name},
        )
        (fold_dir / "train_report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
        reports[plan.name] = report
        last = report.epochs[-1] if report.epochs else None
        if last is None:
            print(f"{plan.name}: initialization checkpoint {report.checkpoint}")
        else:
            print(
                f"{plan.name}: loss {last.loss:.4f}, val ADE/FDE {last.val_ade:.2f}/{last.val_fde:.2f} "
                f"-> {report.checkpoint}"
            )
    return reports
