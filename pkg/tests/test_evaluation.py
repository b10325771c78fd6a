import json

import numpy as np
import pandas as pd
import pytest

from data.synthetic import straight_points, synthetic_scenes
from data.trajectory import Scene, Trajectory
from evaluation.baselines import baseline_for, linear_baseline
from evaluation.distribution import error_distribution, mass_thresholds
from evaluation.evaluate import MetricReport, SceneRecord, evaluate, load_predictor, score
from evaluation.metrics import ade, displacement, fde
from evaluation.plots import plot_error_distribution, plot_trajectories
from evaluation.report import format_table, table_units, write_report
from model.config import ModelConfig
from model.params import init_params
from model.predictor import TrajectoryPredictor
from numerics.checkpoint_util import save_checkpoint
from util.errors_util import ConfigError, ContractError, DimensionError, EmptyMetricError, LoadError


def _straight_scene(i, velocity=(0.5, 0.0), dataset="eth"):
    points = straight_points(20, (float(i), 0.0), velocity)
    traj = Trajectory(i, "Pedestrian", np.arange(20), points)
    return Scene(f"{dataset}/{i}/0", dataset, traj.slice_steps(0, 8), traj.slice_steps(8, 20))


def _report(method, fold, errors, units="meters"):
    records = [
        SceneRecord(f"{fold}/{k}", fold, units, float(np.hypot(*e)), float(np.hypot(*e)), e[0], e[1])
        for k, e in enumerate(errors)
    ]
    return MetricReport(method=method, fold=fold, records=records)


# -----------------------------------------------------------------------------
# metrics
# -----------------------------------------------------------------------------
def test_metric_examples():
    gt = np.zeros((1, 3, 2))
    pred = np.array([[[3.0, 4.0], [0.0, 0.0], [0.0, 1.0]]])
    assert ade(pred, gt) == pytest.approx(2.0)
    assert fde(pred, gt) == pytest.approx(1.0)
    assert ade(gt, gt) == 0.0


def test_metrics_match_loop_oracle(rng):
    pred = rng.normal(size=(4, 12, 2))
    gt = rng.normal(size=(4, 12, 2))
    dists = [[np.sqrt(sum((pred[n, t, c] - gt[n, t, c]) ** 2 for c in range(2))) for t in range(12)] for n in range(4)]
    assert abs(ade(pred, gt) - np.mean(dists)) < 1e-12
    assert abs(fde(pred, gt) - np.mean([row[-1] for row in dists])) < 1e-12
    assert displacement(pred, gt).shape == (4, 12)


def test_metric_errors():
    with pytest.raises(EmptyMetricError):
        ade(np.zeros((0, 12, 2)), np.zeros((0, 12, 2)))
    with pytest.raises(DimensionError):
        fde(np.zeros((1, 12, 2)), np.zeros((1, 11, 2)))


# -----------------------------------------------------------------------------
# baselines
# -----------------------------------------------------------------------------
def test_linear_baseline_extrapolates():
    obs = Trajectory(1, "Pedestrian", np.arange(2), [(0.0, 0.0), (1.0, 1.0)])
    out = linear_baseline(obs, 3)
    np.testing.assert_allclose(out, [[2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])


def test_linear_baseline_static_and_errors():
    obs = Trajectory(1, "Pedestrian", np.arange(3), [(2.0, 5.0)] * 3)
    np.testing.assert_array_equal(linear_baseline(obs, 4), np.tile([2.0, 5.0], (4, 1)))
    with pytest.raises(ContractError):
        linear_baseline(Trajectory(1, "Pedestrian", [0], [(0.0, 0.0)]))
    with pytest.raises(ConfigError):
        baseline_for("social")


# -----------------------------------------------------------------------------
# scoring
# -----------------------------------------------------------------------------
def test_ground_truth_scores_zero():
    scenes = [_straight_scene(i) for i in range(3)]
    report = score(scenes, [s.future.points for s in scenes], method="oracle", fold="eth")
    assert report.ade == 0.0 and report.fde == 0.0
    assert report.n == 3 and report.units == "meters"


def test_linear_baseline_is_exact_on_straight_tracks():
    scenes = synthetic_scenes(5, seed=8, kinds=("straight",), max_neighbors=0)
    report = evaluate(scenes, baseline="linear", fold="synthetic")
    assert report.ade < 1e-12 and report.fde < 1e-12
    assert report.method == "linear"


def test_hand_scored_three_scenes():
    scenes = [_straight_scene(i) for i in range(3)]
    preds = [
        scenes[0].future.points + [1.0, 0.0],
        scenes[1].future.points + [0.0, 2.0],
        scenes[2].future.points,
    ]
    report = score(scenes, preds, method="hand", fold="eth", seed=4)
    assert [r.ade for r in report.records] == pytest.approx([1.0, 2.0, 0.0])
    assert report.ade == pytest.approx(1.0)
    assert report.fde == pytest.approx(1.0)
    # heading is +x, so along-track errors land in dx
    np.testing.assert_allclose(report.final_errors(), [[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]], atol=1e-12)
    assert report.per_dataset() == {"eth": (pytest.approx(1.0), pytest.approx(1.0), 3)}
    again = MetricReport.from_dict(json.loads(json.dumps(report.to_dict())))
    assert again.ade == report.ade and again.seed == 4


def test_score_contract_errors():
    scenes = [_straight_scene(0)]
    with pytest.raises(ContractError):
        score(scenes, [], method="x")
    with pytest.raises(EmptyMetricError):
        score([], [], method="x")
    with pytest.raises(ContractError):
        score([scenes[0].without_future()], [np.zeros((12, 2))], method="x")


def test_evaluate_model(small_config, scenes):
    model = TrajectoryPredictor(small_config, init_params(small_config))
    report = evaluate(scenes, model, fold="synthetic", seed=0)
    assert report.method == "model" and report.n == len(scenes)
    assert np.isfinite(report.ade)
    with pytest.raises(ConfigError):
        evaluate(scenes, model, baseline="linear")
    with pytest.raises(EmptyMetricError):
        evaluate([], model)


def test_load_predictor(small_config, tmp_path):
    params = init_params(small_config, seed=3)
    path = save_checkpoint(tmp_path / "m.ckpt", params, {"model_config": small_config.to_dict()})
    model, meta = load_predictor(path)
    assert model.config == small_config
    np.testing.assert_array_equal(model.params.flat_view(), params.flat_view())
    with pytest.raises(LoadError):
        load_predictor(path, expected_config=ModelConfig.small(n_blocks=3))

    bare = save_checkpoint(tmp_path / "bare.ckpt", params, {})
    with pytest.raises(LoadError):
        load_predictor(bare)


# -----------------------------------------------------------------------------
# error distribution
# -----------------------------------------------------------------------------
def test_distribution_of_perfect_predictions():
    dist = error_distribution(_report("m", "eth", [(0.0, 0.0)] * 4))
    assert dist.median == 0.0
    assert dist.speed_dominated == 0.0 and dist.direction_dominated == 0.0
    assert dist.counts.sum() == 4
    assert dist.contour_levels == {}


def test_distribution_of_symmetric_along_track_errors():
    dist = error_distribution(_report("m", "eth", [(1.0, 0.0), (-1.0, 0.0)]))
    assert dist.median == pytest.approx(1.0)
    assert dist.mean_abs_along == pytest.approx(1.0)
    assert dist.mean_abs_cross == 0.0
    assert dist.speed_dominated == 1.0


def test_distribution_quantiles_and_contours(rng):
    errors = [tuple(e) for e in rng.normal(size=(50, 2))]
    dist = error_distribution(_report("m", "eth", errors), grid_size=32)
    fde_values = np.hypot(*np.array(errors).T)
    assert dist.quantiles[0.5] == pytest.approx(np.median(fde_values))
    assert dist.quantiles[0.25] <= dist.quantiles[0.75] <= dist.quantiles[0.95]
    assert dist.density.shape == (32, 32)
    levels = dist.contour_levels
    assert levels[0.5] >= levels[0.8] >= levels[0.95] > 0
    assert dist.speed_dominated + dist.direction_dominated == pytest.approx(1.0)


def test_mass_thresholds_on_flat_density():
    levels = mass_thresholds(np.ones((4, 4)))
    assert set(levels) == {0.5, 0.8, 0.95}
    assert all(v == 1.0 for v in levels.values())
    assert mass_thresholds(np.zeros((2, 2))) == {}


# -----------------------------------------------------------------------------
# reports and plots
# -----------------------------------------------------------------------------
def _fold_reports():
    return {
        "eth": {"model": _report("model", "eth", [(3.0, 4.0)]), "linear": _report("linear", "eth", [(6.0, 8.0)])},
        "hotel": {"linear": _report("linear", "hotel", [(0.0, 1.0)])},
    }


def test_format_table():
    table = format_table(_fold_reports())
    assert list(table.columns) == ["linear", "model"]
    assert list(table.index) == ["eth", "hotel", "Mean"]
    assert table.loc["eth", "model"] == "5.00/5.00"
    assert table.loc["hotel", "model"] == "-"
    assert table.loc["Mean", "linear"] == "5.50/5.50"
    assert table_units(_fold_reports()) == "meters"


def test_write_report(tmp_path):
    table_path, scenes_path, json_path = write_report(_fold_reports(), tmp_path, {"seed": 1})
    assert table_path.read_text(encoding="utf-8").splitlines()[0] == "ADE/FDE (meters)"
    frame = pd.read_csv(scenes_path)
    assert len(frame) == 3
    assert {"fold", "method", "scene_id", "ade", "fde", "final_dx", "final_dy"} <= set(frame.columns)
    payload = json.loads(json_path.read_text(encoding="utf-8"))
    assert payload["metadata"] == {"seed": 1}
    assert payload["folds"]["eth"]["model"]["ade"] == pytest.approx(5.0)


def test_plots_write_images(tmp_path, scenes):
    preds = [linear_baseline(s.observed, s.t_pred) for s in scenes]
    path = plot_trajectories(scenes, preds, tmp_path / "traj.png", columns=3)
    assert path.read_bytes()[:4] == b"\x89PNG"
    with pytest.raises(ContractError):
        plot_trajectories(scenes, preds[:-1], tmp_path / "bad.png")

    rng = np.random.default_rng(0)
    dist = error_distribution(_report("m", "eth", [tuple(e) for e in rng.normal(size=(20, 2))]))
    out = plot_error_distribution(dist, tmp_path / "errors.png", title="m on eth")
    assert out.exists() and out.stat().st_size > 0
