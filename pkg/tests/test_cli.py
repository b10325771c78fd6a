import json
import os

import pytest

import app
from app import build_parser, run_main_app
from data.scene_cache import load_scene_cache
from numerics.checkpoint_util import load_checkpoint

SMALL_MODEL = """\
n_blocks=1
heads=2
d_model=12
latent_len=4
pe_dim=4
pose_mlp=2,6,8
goal_mlp=48,16,2
traj_mlp=14,16,24
ff_mult=2
crop_size=16
patch_size=8
"""


@pytest.fixture(autouse=True)
def isolated(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    for key in list(os.environ):
        if key.startswith("TRAJPRED_"):
            monkeypatch.delenv(key)


def _eth_root(base, name, agents=2, frames=25):
    root = base / name
    root.mkdir(parents=True)
    rows = []
    for k in range(frames):
        for a in range(1, agents + 1):
            rows.append(f"{10 * k} {a} {0.5 * k:.2f} {float(a):.2f}")
    (root / "crowd.txt").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return root


@pytest.fixture
def cache(tmp_path):
    roots = [_eth_root(tmp_path / "data", "eth"), _eth_root(tmp_path / "data", "hotel")]
    argv = ["prepare", "--out", str(tmp_path / "prep")]
    for root in roots:
        argv += ["--dataset-root", str(root)]
    assert run_main_app(argv) == 0
    return tmp_path / "prep" / "scenes.pkl"


@pytest.fixture
def model_cfg(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text(SMALL_MODEL, encoding="utf-8")
    return path


def test_parser_knows_every_command():
    parser = build_parser()
    for command in ("prepare", "train", "eval", "baseline", "gradcheck", "plot"):
        assert parser.parse_args([command]).command == command
    with pytest.raises(SystemExit):
        parser.parse_args(["serve"])


def test_prepare_writes_cache_and_summary(cache, capsys):
    scenes, data = load_scene_cache(cache)
    assert sorted(scenes) == ["eth", "hotel"]
    # 2 agents x 6 windows of 20 steps
    assert [len(v) for v in scenes.values()] == [12, 12]
    assert scenes["eth"][0].scene_id == "eth/crowd/1/0"
    assert data["t_obs"] == 8
    summary = json.loads((cache.parent / "prepare_summary.json").read_text(encoding="utf-8"))
    assert summary["total_scenes"] == 24
    assert summary["longest_path_by_class"]["Pedestrian"] == pytest.approx(9.5)


def test_baseline_on_straight_tracks_is_exact(cache, tmp_path, capsys):
    code = run_main_app(["baseline", "--scenes", str(cache), "--split", "all", "--out", str(tmp_path / "lin")])
    out = capsys.readouterr().out
    assert code == 0
    assert "ADE/FDE (meters)" in out
    assert "0.00/0.00" in out
    assert (tmp_path / "lin" / "table.txt").exists()
    assert (tmp_path / "lin" / "run_config.json").exists()


def test_train_then_eval(cache, model_cfg, tmp_path, capsys):
    train_cfg = tmp_path / "train.cfg"
    train_cfg.write_text("epochs=1\nbatch_size=8\n", encoding="utf-8")
    code = run_main_app([
        "train", "--scenes", str(cache), "--model-config", str(model_cfg),
        "--train-config", str(train_cfg), "--seed", "3", "--out", str(tmp_path / "train"),
    ])
    assert code == 0
    for fold in ("eth", "hotel"):
        assert (tmp_path / "train" / fold / "final.ckpt").exists()
        assert (tmp_path / "train" / fold / "train_report.json").exists()

    code = run_main_app([
        "eval", "--scenes", str(cache), "--checkpoint", str(tmp_path / "train"),
        "--model-config", str(model_cfg), "--out", str(tmp_path / "eval"),
    ])
    assert code == 0
    report = json.loads((tmp_path / "eval" / "report.json").read_text(encoding="utf-8"))
    assert set(report["folds"]) == {"eth", "hotel"}
    assert set(report["folds"]["eth"]) == {"model", "linear"}


def test_checkpoints_do_not_depend_on_the_output_directory(cache, model_cfg, tmp_path, capsys):
    train_cfg = tmp_path / "train.cfg"
    train_cfg.write_text("epochs=1\nbatch_size=8\n", encoding="utf-8")
    for out in ("first", "second/nested"):
        code = run_main_app([
            "train", "--scenes", str(cache), "--model-config", str(model_cfg), "--train-config",
            str(train_cfg), "--seed", "3", "--split", "eth", "--out", str(tmp_path / out),
        ])
        assert code == 0
    first = tmp_path / "first" / "eth" / "final.ckpt"
    second = tmp_path / "second" / "nested" / "eth" / "final.ckpt"
    assert first.read_bytes() == second.read_bytes()

    _, meta = load_checkpoint(first)
    assert meta["run_settings"]["seed"] == 3
    assert "out" not in meta["run_settings"]
    assert str(tmp_path) not in json.dumps(meta)


def test_gradcheck_small_model(model_cfg, tmp_path, capsys):
    code = run_main_app(["gradcheck", "--model-config", str(model_cfg), "--out", str(tmp_path / "gc")])
    assert code == 0
    payload = json.loads((tmp_path / "gc" / "gradcheck.json").read_text(encoding="utf-8"))
    assert payload["max_rel_err"] < 1e-4
    assert set(payload["modes"]) == {"teacher_forced", "inference"}


def test_plot_falls_back_to_baseline(cache, tmp_path, capsys):
    code = run_main_app(["plot", "--scenes", str(cache), "--split", "all", "--out", str(tmp_path / "plots")])
    assert code == 0
    assert (tmp_path / "plots" / "all" / "trajectories.png").exists()
    dist = json.loads((tmp_path / "plots" / "all" / "distribution.json").read_text(encoding="utf-8"))
    assert dist["method"] == "linear"


def test_prepare_on_empty_directory_fails_cleanly(tmp_path, capsys):
    empty = tmp_path / "nothing"
    empty.mkdir()
    code = run_main_app(["prepare", "--dataset-root", str(empty), "--out", str(tmp_path / "p")])
    err = capsys.readouterr().err
    assert code == 1
    assert "trajpred prepare: missing path(s)" in err


def test_known_failures_exit_one(tmp_path, capsys):
    assert run_main_app(["train", "--out", str(tmp_path / "t")]) == 1
    assert "needs --scenes" in capsys.readouterr().err
    assert run_main_app(["eval", "--scenes", str(tmp_path / "none.pkl")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("depth=3\n", encoding="utf-8")
    assert run_main_app(["gradcheck", "--model-config", str(bad), "--out", str(tmp_path / "g")]) == 1


def test_unexpected_failures_exit_two(monkeypatch, tmp_path):
    def explode(run_config):
        raise RuntimeError("boom")

    monkeypatch.setattr(app, "_runners", lambda: {"baseline": explode})
    assert run_main_app(["baseline", "--out", str(tmp_path / "x")]) == 2
