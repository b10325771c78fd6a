"""
===============================================================================
TRAJPRED - COMMAND-LINE ENTRY POINT
===============================================================================

Usage:
    python app.py prepare   --dataset-root data/eth --dataset-root data/hotel ... --out runs/prep
    python app.py train     --scenes runs/prep/scenes.pkl --split loocv --out runs/train
    python app.py eval      --scenes runs/prep/scenes.pkl --checkpoint runs/train --out runs/eval
    python app.py baseline  --scenes runs/prep/scenes.pkl --split all --out runs/linear
    python app.py gradcheck --out runs/gradcheck
    python app.py plot      --scenes runs/prep/scenes.pkl --checkpoint runs/train --out runs/plots

Settings precedence:
    defaults < --*-config files < TRAJPRED_* environment (.env loaded first) < flags

Exit codes:
    0   success
    1   a known failure (bad config, missing path, parse error, ...): one line
        on stderr
    2   unexpected error (traceback logged)

===============================================================================
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from init_config import FORMATS, RunConfig, load_environment, make_run_config
from model.config import BACKBONES
from numerics.ops_util import PRECISIONS
from util.errors_util import TrajPredError
from util.log_util import configure_logging

logger = logging.getLogger("TrajPred")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajpred",
        description="Goal-conditioned pedestrian trajectory prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: runs)")
    common.add_argument("--seed", type=int, help="seed recorded in every artifact")
    common.add_argument("--precision", choices=sorted(PRECISIONS), help="fast = float32, check = float64")
    common.add_argument("--backbone", choices=BACKBONES, help="model variant")
    common.add_argument("--model-config", help="KEY=VALUE model config file")
    common.add_argument("--train-config", help="KEY=VALUE training config file")
    common.add_argument("--data-config", help="KEY=VALUE data config file")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")

    scenes = argparse.ArgumentParser(add_help=False)
    scenes.add_argument("--scenes", help="scene cache written by prepare")
    scenes.add_argument("--split", help="loocv | random | all | <dataset> (default: loocv)")

    prepare = sub.add_parser("prepare", parents=[common], help="parse annotations into a scene cache")
    prepare.add_argument("--dataset-root", action="append", dest="dataset_roots",
                         help="one dataset directory; repeat per dataset")
    prepare.add_argument("--format", choices=FORMATS, help="annotation format (default: eth_ucy)")
    prepare.add_argument("--dump-crops", type=int, help="write this many agent-centric crops as PNG")

    sub.add_parser("train", parents=[common, scenes], help="train one model per fold")

    for name, text in (("eval", "evaluate checkpoints against the baseline"),
                       ("plot", "trajectory overlays and final-error distributions")):
        p = sub.add_parser(name, parents=[common, scenes], help=text)
        p.add_argument("--checkpoint", help="checkpoint file or train output directory")
        p.add_argument("--baseline", help="baseline name (default: linear)")

    baseline = sub.add_parser("baseline", parents=[common, scenes], help="score a deterministic baseline")
    baseline.add_argument("--baseline", help="baseline name (default: linear)")

    sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the loss gradient")
    return parser


def _runners() -> Dict[str, Callable[[RunConfig], object]]:
    from applications.eval_app import run_baseline_app, run_eval_app
    from applications.gradcheck_app import run_gradcheck_app
    from applications.plot_app import run_plot_app
    from applications.prepare_app import run_prepare_app
    from applications.train_app import run_train_app

    return {
        "prepare": run_prepare_app,
        "train": run_train_app,
        "eval": run_eval_app,
        "baseline": run_baseline_app,
        "gradcheck": run_gradcheck_app,
        "plot": run_plot_app,
    }


def run_main_app(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    values = {k: v for k, v in vars(args).items() if k != "command"}
    load_environment()
    try:
        run_config = make_run_config(args.command, **values)
        configure_logging(run_config.log_level)
        logger.info("Running '%s' -> %s", run_config.command, run_config.out_dir)
        _runners()[run_config.command](run_config)
    except TrajPredError as exc:
        logger.debug("Failure details", exc_info=True)
        print(f"trajpred {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception:
        logger.exception("Unexpected failure in '%s'", args.command)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(run_main_app())
