"""
===============================================================================
EVAL / BASELINE - PER-FOLD METRIC REPORTS
===============================================================================

Purpose:
    run_eval_app():      trained checkpoint(s) in inference mode, reported next
                         to the linear baseline on the same test scenes
    run_baseline_app():  deterministic baseline only

Checkpoint lookup (--checkpoint):
    - a .ckpt file: used for every selected fold
    - a train output directory: <dir>/<fold>/best.ckpt, else final.ckpt

Outputs (under --out):
    table.txt, scenes.csv, report.json, run_config.json

===============================================================================
"""

import logging
from pathlib import Path
from typing import Dict

from applications.train_app import check_horizons, load_run_scenes
from data.splits import resolve_splits
from evaluation.evaluate import MetricReport, evaluate, load_predictor
from evaluation.report import format_table, table_units, write_report
from init_config import RunConfig, write_run_record
from util.errors_util import ConfigError, EmptyMetricError, PathError

logger = logging.getLogger("EvalApp")

Reports = Dict[str, Dict[str, MetricReport]]


def checkpoint_for(path, fold: str) -> Path:
    path = Path(path)
    if path.is_file():
        return path
    candidates = [path / fold / "best.ckpt", path / fold / "final.ckpt"]
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise PathError(candidates)


def _print_table(reports: Reports) -> None:
    print(f"ADE/FDE ({table_units(reports)})")
    print(format_table(reports).to_string())


def _non_empty(plan) -> bool:
    if not plan.test:
        logger.warning("Fold '%s' has no test scenes; skipped", plan.name)
        return False
    return True


def run_eval_app(run_config: RunConfig) -> Reports:
    if run_config.checkpoint is None:
        raise ConfigError("'eval' needs --checkpoint (a .ckpt file or a train output directory)")
    scenes_by_dataset, data = load_run_scenes(run_config)
    seed = run_config.effective_seed()
    plans = [p for p in resolve_splits(scenes_by_dataset, run_config.split, seed=seed,
                                       test_fraction=data.test_fraction) if _non_empty(p)]
    if not plans:
        raise EmptyMetricError(f"split '{run_config.split}' has no test scenes")
    expected = run_config.model() if run_config.model_config is not None else None
    precision = run_config.precision or "check"

    reports: Reports = {}
    checkpoints = {}
    for plan in plans:
        ckpt = checkpoint_for(run_config.checkpoint, plan.name)
        model, _ = load_predictor(ckpt, precision, expected)
        check_horizons(model.config, data)
        checkpoints[plan.name] = str(ckpt)
        reports[plan.name] = {
            "model": evaluate(plan.test, model, fold=plan.name, seed=seed,
                              sampling=data.sampling, crop_sizes=data.crop_sizes),
            run_config.baseline: evaluate(plan.test, baseline=run_config.baseline, fold=plan.name, seed=seed),
        }

    write_run_record(run_config, run_config.out_dir, checkpoints=checkpoints, data_config=data.to_dict())
    write_report(reports, run_config.out_dir, {"run_config": run_config.to_dict(), "checkpoints": checkpoints})
    _print_table(reports)
    return reports


def run_baseline_app(run_config: RunConfig) -> Reports:
    scenes_by_dataset, data = load_run_scenes(run_config)
    seed = run_config.effective_seed()
    plans = [p for p in resolve_splits(scenes_by_dataset, run_config.split, seed=seed,
                                       test_fraction=data.test_fraction) if _non_empty(p)]
    if not plans:
        raise EmptyMetricError(f"split '{run_config.split}' has no test scenes")

    reports: Reports = {
        plan.name: {
            run_config.baseline: evaluate(plan.test, baseline=run_config.baseline, fold=plan.name, seed=seed)
        }
        for plan in plans
    }
    write_run_record(run_config, run_config.out_dir, data_config=data.to_dict())
    write_report(reports, run_config.out_dir, {"run_config": run_config.to_dict()})
    _print_table(reports)
    return reports
