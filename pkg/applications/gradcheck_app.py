"""
GRADCHECK - end-to-end finite-difference check of the training loss.

Builds synthetic scenes (2 neighbors each, 32x32 BEV image), a patch-backbone
model with 4 encoder blocks at check precision, and compares analytic and
central-difference gradients of the loss in both forward modes. Writes
<out>/gradcheck.json.
"""

import json
import logging
from typing import Dict

from data.synthetic import synthetic_scenes
from init_config import RunConfig, write_run_record
from model.config import ModelConfig
from model.params import init_params
from model.predictor import MODES, TrajectoryPredictor
from numerics.gradcheck_util import GradCheckReport, gradient_check
from numerics.ops_util import dtype_for
from training.loss import loss_terms
from util.errors_util import NumericError

logger = logging.getLogger("GradCheckApp")

TOLERANCE = 1e-4
IMAGE_SIZE = 32
GRADCHECK_CROP = 16


def gradcheck_model_config(base: ModelConfig) -> ModelConfig:
    """Patch backbone, 4 blocks; the crop shrinks to fit the synthetic image."""
    values = base.to_dict()
    values.update(backbone="patch", n_blocks=4)
    if values["crop_size"] > IMAGE_SIZE:
        values.update(crop_size=GRADCHECK_CROP, patch_size=min(values["patch_size"], GRADCHECK_CROP))
    return ModelConfig.from_dict(values)


def check_model_gradients(
    model_config: ModelConfig,
    *,
    seed: int = 0,
    scenes: int = 2,
    probe_count: int = 32,
    lam: float = 0.5,
) -> Dict[str, GradCheckReport]:
    data = synthetic_scenes(
        scenes,
        seed=seed,
        kinds=("curved", "straight"),
        min_neighbors=2,
        max_neighbors=2,
        with_image=True,
        image_size=IMAGE_SIZE,
        t_obs=model_config.t_obs,
        t_pred=model_config.t_pred,
    )
    params = init_params(model_config, seed, dtype_for("check"))
    model = TrajectoryPredictor(model_config, params)
    batch = model.collate(data, sampling="bilinear")

    reports = {}
    for mode in MODES:
        def loss_fn(backward: bool, mode=mode) -> float:
            goal, traj, cache = model.forward_batch(batch, mode)
            value, d_traj, d_goal, _ = loss_terms(traj, goal, batch.future, lam)
            if backward:
                model.backward(d_goal, d_traj, cache)
            return value

        reports[mode] = gradient_check(loss_fn, params, probe_count, seed=seed)
    return reports


def run_gradcheck_app(run_config: RunConfig) -> Dict[str, GradCheckReport]:
    model_config = gradcheck_model_config(run_config.model())
    seed = run_config.effective_seed()
    reports = check_model_gradients(model_config, seed=seed)
    worst = max(r.max_rel_err for r in reports.values())

    out_dir = run_config.out_dir
    write_run_record(run_config, out_dir, model_config=model_config.to_dict())
    payload = {
        "model_config": model_config.to_dict(),
        "seed": seed,
        "tolerance": TOLERANCE,
        "max_rel_err": worst,
        "modes": {mode: r.to_dict() for mode, r in reports.items()},
    }
    (out_dir / "gradcheck.json").write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    for mode, r in reports.items():
        print(f"{mode}: max_rel_err {r.max_rel_err:.3e} over {r.probes} probes ({r.rejected} rejected)")
    if worst >= TOLERANCE:
        raise NumericError(f"gradient check failed: max_rel_err {worst:.3e} >= {TOLERANCE:g}")
    return reports
