"""
===============================================================================
TRAINER - TEACHER-FORCED END-TO-END OPTIMIZATION
===============================================================================

Purpose:
    train() fits a TrajectoryPredictor on a SplitPlan:

      - seeded parameter init and per-epoch shuffling
      - teacher-forced forward (trajectory decoder conditioned on the true
        endpoint), combined loss ADE + lambda * goal error
      - Adam with the step schedule
      - validation ADE/FDE in inference mode after each epoch

Outputs (under out_dir):
    train_log.jsonl   one JSON record per epoch (epoch, loss, train_ade, lr,
                      val_ade, val_fde, seed, elapsed)
    best.ckpt         parameters with the lowest validation ADE so far
    final.ckpt        parameters after the last epoch (initialization when
                      epochs == 0)
    last_good.ckpt    written only when training aborts on a non-finite
                      loss/gradient: the parameters after the last completed epoch

Validation scenes:
    split.validation when present, else a seeded 10% holdout of split.train;
    when that holdout is empty the training scenes are scored instead.

===============================================================================
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from data.splits import SplitPlan, holdout_validation
from data.trajectory import Scene
from evaluation.metrics import ade, fde
from model.config import ModelConfig
from model.params import init_params
from model.predictor import TrajectoryPredictor
from numerics.adam_util import AdamState, adam_step
from numerics.checkpoint_util import save_checkpoint
from numerics.ops_util import dtype_for
from numerics.params_util import ModelParams
from training.config import TrainConfig
from training.loss import loss_terms
from training.prefetch import BatchPrefetcher
from training.schedule import lr_schedule
from util.errors_util import ContractError, TrainingError
from util.log_util import JsonLinesWriter
from util.transform_util import transform_points

logger = logging.getLogger("Trainer")

LOG_NAME = "train_log.jsonl"


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_ade: float
    lr: float
    val_ade: float
    val_fde: float
    elapsed: float = 0.0


@dataclass
class TrainReport:
    epochs: List[EpochRecord] = field(default_factory=list)
    initial_loss: float = math.nan
    wall_clock: float = 0.0
    checkpoint: Optional[Path] = None
    best_checkpoint: Optional[Path] = None
    best_val_ade: float = math.inf
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epochs": [asdict(r) for r in self.epochs],
            "initial_loss": self.initial_loss,
            "wall_clock": self.wall_clock,
            "checkpoint": None if self.checkpoint is None else str(self.checkpoint),
            "best_checkpoint": None if self.best_checkpoint is None else str(self.best_checkpoint),
            "best_val_ade": self.best_val_ade,
            "seed": self.seed,
        }


def score_scenes(model: TrajectoryPredictor, scenes: Sequence[Scene], batch_size: int, **collate_kwargs):
    """Inference-mode (ADE, FDE) in the agent frame."""
    preds = model.predict(scenes, "inference", batch_size=batch_size, **collate_kwargs)
    gts = []
    for scene, pred in zip(scenes, preds):
        gts.append(transform_points(pred.transform, scene.future.points))
    traj = np.stack([p.trajectory for p in preds])
    gts = np.stack(gts)
    return ade(traj, gts), fde(traj, gts)


def teacher_forced_loss(model: TrajectoryPredictor, scenes: Sequence[Scene], config: TrainConfig, **collate_kwargs) -> float:
    """Mean teacher-forced loss over `scenes` without touching gradients."""
    total = 0.0
    for start in range(0, len(scenes), config.batch_size):
        chunk = list(scenes[start:start + config.batch_size])
        batch = model.collate(chunk, **collate_kwargs)
        goal, traj, _ = model.forward_batch(batch, "teacher_forced")
        value, _, _, _ = loss_terms(traj, goal, batch.future, config.lam)
        total += value * len(chunk)
    return total / len(scenes)


def _metadata(model_config: ModelConfig, train_config: TrainConfig, split: SplitPlan, epoch: int,
              extra: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    meta = {
        "model_config": model_config.to_dict(),
        "train_config": train_config.to_dict(),
        "seed": train_config.seed,
        "precision": train_config.precision,
        "split": split.name,
        "epoch": epoch,
    }
    meta.update(extra or {})
    return meta


def train(
    split: SplitPlan,
    model_config: ModelConfig,
    train_config: TrainConfig,
    out_dir,
    *,
    params: Optional[ModelParams] = None,
    sampling: str = "bilinear",
    crop_sizes: Optional[Dict[str, int]] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> TrainReport:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    seed = train_config.seed
    collate_kwargs = {"sampling": sampling, "crop_sizes": crop_sizes}

    dtype = dtype_for(train_config.precision)
    params = init_params(model_config, seed, dtype) if params is None else params.astype(dtype)
    model = TrajectoryPredictor(model_config, params)
    report = TrainReport(seed=seed)

    if train_config.epochs == 0:
        report.checkpoint = save_checkpoint(
            out_dir / "final.ckpt", params, _metadata(model_config, train_config, split, 0, metadata)
        )
        report.wall_clock = time.perf_counter() - started
        logger.info("epochs=0: wrote initialization checkpoint %s", report.checkpoint)
        return report

    if not split.train:
        raise ContractError(f"split '{split.name}' has no training scenes")
    if split.validation:
        train_scenes, val_scenes = list(split.train), list(split.validation)
    else:
        train_scenes, val_scenes = holdout_validation(split.train, train_config.validation_fraction, seed)
    if not val_scenes:
        logger.warning("Validation holdout is empty; scoring checkpoints on the training scenes")
        val_scenes = train_scenes

    writer = JsonLinesWriter(out_dir / LOG_NAME)
    state = AdamState()
    rng = np.random.default_rng(seed)
    last_good = params.copy()
    report.initial_loss = teacher_forced_loss(model, train_scenes, train_config, **collate_kwargs)
    logger.info(
        "Training '%s': %d train / %d validation scenes, %d epochs, precision=%s, initial loss %.6f",
        split.name, len(train_scenes), len(val_scenes), train_config.epochs,
        train_config.precision, report.initial_loss,
    )

    def abort(reason: str):
        path = save_checkpoint(
            out_dir / "last_good.ckpt",
            last_good,
            _metadata(model_config, train_config, split, len(report.epochs), metadata),
        )
        logger.error("%s; last good parameters kept in %s", reason, path)
        raise TrainingError(f"{reason} (last good checkpoint: {path})")

    for epoch in range(train_config.epochs):
        lr = lr_schedule(epoch, train_config)
        order = rng.permutation(len(train_scenes))
        chunks = [
            [train_scenes[i] for i in order[start:start + train_config.batch_size]]
            for start in range(0, len(order), train_config.batch_size)
        ]
        prefetcher = BatchPrefetcher(
            chunks, lambda chunk: model.collate(chunk, **collate_kwargs), maxsize=train_config.prefetch
        )

        loss_sum = 0.0
        ade_sum = 0.0
        for batch in prefetcher:
            params.zero_grad()
            goal, traj, cache = model.forward_batch(batch, "teacher_forced")
            value, d_traj, d_goal, parts = loss_terms(traj, goal, batch.future, train_config.lam)
            if not math.isfinite(value):
                prefetcher.close()
                abort(f"non-finite loss at epoch {epoch}")
            model.backward(d_goal, d_traj, cache)
            try:
                adam_step(params, state, lr)
            except TrainingError as exc:
                prefetcher.close()
                abort(str(exc))
            loss_sum += value * len(batch)
            ade_sum += parts["ade"] * len(batch)

        val_ade, val_fde = score_scenes(model, val_scenes, train_config.batch_size, **collate_kwargs)
        record = EpochRecord(
            epoch=epoch,
            loss=loss_sum / len(train_scenes),
            train_ade=ade_sum / len(train_scenes),
            lr=lr,
            val_ade=val_ade,
            val_fde=val_fde,
            elapsed=time.perf_counter() - started,
        )
        report.epochs.append(record)
        writer.write({**asdict(record), "seed": seed})
        last_good = params.copy()

        if val_ade < report.best_val_ade:
            report.best_val_ade = val_ade
            report.best_checkpoint = save_checkpoint(
                out_dir / "best.ckpt", params, _metadata(model_config, train_config, split, epoch + 1, metadata)
            )

    report.checkpoint = save_checkpoint(
        out_dir / "final.ckpt",
        params,
        _metadata(model_config, train_config, split, train_config.epochs, metadata),
    )
    report.wall_clock = time.perf_counter() - started
    logger.info(
        "Finished '%s': final loss %.6f, best val ADE %.4f, %.1fs",
        split.name, report.epochs[-1].loss, report.best_val_ade, report.wall_clock,
    )
    return report
