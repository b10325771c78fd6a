import json

import numpy as np
import pytest

from data.splits import SplitPlan
from data.synthetic import synthetic_scenes
from data.trajectory import Trajectory
from evaluation.evaluate import evaluate, load_predictor
from model.config import ModelConfig
from model.params import init_params
from model.predictor import Prediction
from numerics.checkpoint_util import load_checkpoint
from training.config import TrainConfig
from training.loss import loss, loss_terms
from training.prefetch import BatchPrefetcher
from training.schedule import lr_schedule
from training.trainer import LOG_NAME, train
from util.errors_util import ConfigError, ContractError, TrainingError
from util.transform_util import RigidTransform2D, invert, transform_points


def _plan(n=6, seed=0, **kwargs):
    return SplitPlan(name="synthetic", train=synthetic_scenes(n, seed=seed, **kwargs), test=[])


# -----------------------------------------------------------------------------
# loss
# -----------------------------------------------------------------------------
def test_loss_on_constant_offset():
    traj = np.zeros((1, 12, 2))
    gt = np.tile([3.0, 4.0], (1, 12, 1))
    value, d_traj, d_goal, parts = loss_terms(traj, np.zeros((1, 2)), gt, 0.5)
    assert value == pytest.approx(7.5)
    assert parts == {"ade": pytest.approx(5.0), "goal_fde": pytest.approx(5.0)}
    np.testing.assert_allclose(d_traj[0, 0], [-0.6 / 12, -0.8 / 12])
    np.testing.assert_allclose(d_goal[0], [-0.3, -0.4])


def test_loss_exact_prediction_has_zero_gradient():
    gt = np.random.default_rng(0).normal(size=(2, 12, 2))
    value, d_traj, d_goal, _ = loss_terms(gt.copy(), gt[:, -1].copy(), gt, 0.5)
    assert value == 0.0
    assert not d_traj.any() and not d_goal.any()


def test_prediction_loss_moves_world_truth_into_agent_frame():
    t = RigidTransform2D.from_angle(0.4, (1.0, -2.0))
    gt_agent = np.tile([3.0, 4.0], (12, 1))
    world = transform_points(invert(t), gt_agent)
    pred = Prediction(goal=np.zeros(2), trajectory=np.zeros((12, 2)), transform=t)
    gt = Trajectory(0, "Pedestrian", np.arange(8, 20), world)
    assert loss(pred, gt, 0.5) == pytest.approx(7.5)
    with pytest.raises(ContractError):
        loss(pred, Trajectory(0, "Pedestrian", np.arange(3), world[:3]))


def test_loss_shape_checks():
    with pytest.raises(ContractError):
        loss_terms(np.zeros((1, 12, 2)), np.zeros((1, 2)), np.zeros((1, 11, 2)), 0.5)


# -----------------------------------------------------------------------------
# schedule and config
# -----------------------------------------------------------------------------
def test_lr_schedule_steps():
    config = TrainConfig()
    assert lr_schedule(0, config) == pytest.approx(5e-4)
    assert lr_schedule(29, config) == pytest.approx(5e-4)
    assert lr_schedule(30, config) == pytest.approx(1e-4)
    assert lr_schedule(64, config) == pytest.approx(2e-5)
    with pytest.raises(ConfigError):
        lr_schedule(-1, config)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(precision="half")
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"momentum": 0.9})
    assert TrainConfig.from_dict(TrainConfig(epochs=3).to_dict()).epochs == 3

    overfit = TrainConfig.overfit(seed=4)
    assert (overfit.batch_size, overfit.epochs, overfit.validation_fraction, overfit.seed) == (1, 500, 0.0, 4)
    assert lr_schedule(499, overfit) == pytest.approx(1e-3 * 0.5 ** 6)


# -----------------------------------------------------------------------------
# prefetch
# -----------------------------------------------------------------------------
def test_prefetcher_keeps_order():
    chunks = [[i] for i in range(7)]
    assert list(BatchPrefetcher(chunks, lambda c: c[0] * 10, maxsize=2)) == [0, 10, 20, 30, 40, 50, 60]


def test_prefetcher_reraises_worker_errors():
    def build(chunk):
        if chunk[0] == 2:
            raise ValueError("bad chunk")
        return chunk[0]

    seen = []
    with pytest.raises(ValueError, match="bad chunk"):
        for item in BatchPrefetcher([[0], [1], [2], [3]], build):
            seen.append(item)
    assert seen == [0, 1]


# -----------------------------------------------------------------------------
# training loop
# -----------------------------------------------------------------------------
def test_zero_epochs_writes_initial_checkpoint(small_config, tmp_path):
    config = TrainConfig(epochs=0, seed=7, precision="check")
    report = train(_plan(), small_config, config, tmp_path, metadata={"fold": "synthetic"})
    params, meta = load_checkpoint(report.checkpoint)
    np.testing.assert_array_equal(params.flat_view(), init_params(small_config, seed=7).flat_view())
    assert meta["epoch"] == 0 and meta["seed"] == 7 and meta["fold"] == "synthetic"
    assert not (tmp_path / LOG_NAME).exists()


def test_seeded_runs_are_identical(small_config, tmp_path):
    config = TrainConfig(epochs=2, batch_size=3, seed=2, precision="check")
    a = train(_plan(), small_config, config, tmp_path / "a")
    b = train(_plan(), small_config, config, tmp_path / "b")
    assert a.checkpoint.read_bytes() == b.checkpoint.read_bytes()
    assert [r.loss for r in a.epochs] == [r.loss for r in b.epochs]

    lines = (tmp_path / "a" / LOG_NAME).read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first["epoch"] == 0 and first["seed"] == 2
    assert first["lr"] == pytest.approx(5e-4)
    assert (tmp_path / "a" / "best.ckpt").exists()


def test_different_seeds_diverge(small_config, tmp_path):
    a = train(_plan(), small_config, TrainConfig(epochs=1, seed=0, precision="check"), tmp_path / "a")
    b = train(_plan(), small_config, TrainConfig(epochs=1, seed=1, precision="check"), tmp_path / "b")
    assert a.checkpoint.read_bytes() != b.checkpoint.read_bytes()


def test_training_needs_scenes(small_config, tmp_path):
    empty = SplitPlan(name="empty", train=[], test=[])
    with pytest.raises(ContractError):
        train(empty, small_config, TrainConfig(epochs=1), tmp_path)


def test_non_finite_loss_aborts_with_last_good(small_config, tmp_path):
    params = init_params(small_config, seed=0)
    params["goal.1.b"].tensor[0] = np.nan
    with pytest.raises(TrainingError, match="non-finite loss"):
        train(_plan(), small_config, TrainConfig(epochs=2, precision="check"), tmp_path, params=params)
    assert (tmp_path / "last_good.ckpt").exists()


@pytest.mark.slow
def test_overfits_eight_mixed_scenes(tmp_path):
    plan = _plan(8, seed=0, kinds=("straight", "curved"), min_neighbors=1, max_neighbors=3)
    report = train(plan, ModelConfig(), TrainConfig.overfit(), tmp_path)
    last = report.epochs[-1]
    assert len(report.epochs) == 500
    assert last.train_ade < 0.05
    assert last.loss < 0.01 * report.initial_loss


@pytest.mark.slow
def test_overfits_a_single_scene(small_config, tmp_path):
    plan = _plan(1, seed=4, kinds=("curved",), min_neighbors=1, max_neighbors=1)
    report = train(plan, small_config, TrainConfig.overfit(), tmp_path)
    assert report.epochs[-1].loss < 0.01 * report.initial_loss


@pytest.mark.slow
def test_trained_model_beats_constant_velocity_on_curved_tracks(tmp_path):
    scenes = synthetic_scenes(500, seed=21, kinds=("curved",), min_neighbors=0, max_neighbors=2)
    plan = SplitPlan(name="curved", train=scenes[:400], test=scenes[400:])
    config = TrainConfig(epochs=60, batch_size=16, lr0=1e-3, lr_decay=0.5, lr_decay_every=15, seed=0)
    report = train(plan, ModelConfig(), config, tmp_path)

    model, _ = load_predictor(report.best_checkpoint)
    learned = evaluate(plan.test, model, fold="curved")
    linear = evaluate(plan.test, baseline="linear", fold="curved")
    assert learned.ade <= 0.8 * linear.ade
