"""
PLOT - trajectory overlays and final-error distributions per fold.

With --checkpoint the model's inference predictions are plotted and scored;
without it the linear baseline stands in. Writes, per fold under --out:

    <fold>/trajectories.png     first PLOT_SCENES test scenes
    <fold>/errors.png           FDE histogram + final-error cloud with contours
    <fold>/distribution.json    histogram, quantiles, decomposition, contour levels
"""

import json
import logging
from pathlib import Path
from typing import Dict

from applications.eval_app import checkpoint_for
from applications.train_app import check_horizons, load_run_scenes
from data.splits import resolve_splits
from evaluation.baselines import baseline_for
from evaluation.distribution import ErrorDistribution, error_distribution
from evaluation.evaluate import load_predictor, score
from evaluation.plots import plot_error_distribution, plot_trajectories
from init_config import RunConfig, write_run_record

logger = logging.getLogger("PlotApp")

PLOT_SCENES = 8


def run_plot_app(run_config: RunConfig) -> Dict[str, ErrorDistribution]:
    scenes_by_dataset, data = load_run_scenes(run_config)
    seed = run_config.effective_seed()
    plans = resolve_splits(scenes_by_dataset, run_config.split, seed=seed, test_fraction=data.test_fraction)
    out_dir = Path(run_config.out_dir)
    write_run_record(run_config, out_dir, data_config=data.to_dict())

    distributions = {}
    for plan in plans:
        if not plan.test:
            logger.warning("Fold '%s' has no test scenes; nothing to plot", plan.name)
            continue
        if run_config.checkpoint is not None:
            model, _ = load_predictor(checkpoint_for(run_config.checkpoint, plan.name), run_config.precision or "check")
            check_horizons(model.config, data)
            preds = model.predict(
                [s.without_future() for s in plan.test],
                "inference",
                sampling=data.sampling,
                crop_sizes=data.crop_sizes,
            )
            world = [p.world_trajectory() for p in preds]
            method = "model"
        else:
            predict = baseline_for(run_config.baseline)
            world = [predict(s.observed, s.t_pred) for s in plan.test]
            method = run_config.baseline

        fold_dir = out_dir / plan.name
        plot_trajectories(
            plan.test[:PLOT_SCENES],
            world[:PLOT_SCENES],
            fold_dir / "trajectories.png",
            show_baseline=method == "model",
        )
        report = score(plan.test, world, method=method, fold=plan.name, seed=seed)
        dist = error_distribution(report)
        plot_error_distribution(dist, fold_dir / "errors.png", title=f"{method} on {plan.name}")
        (fold_dir / "distribution.json").write_text(
            json.dumps({"method": method, "fold": plan.name, "seed": seed, **dist.to_dict()}, indent=2, sort_keys=True),
            encoding="utf-8",
        )
        print(f"{plan.name}: median final error {dist.median:.2f} {dist.units} -> {fold_dir}")
        distributions[plan.name] = dist
    return distributions
