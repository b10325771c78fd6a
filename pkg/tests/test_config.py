import json
import os

import pytest

from init_config import (
    DATA_DEFAULTS,
    MODEL_DEFAULTS,
    TRAIN_DEFAULTS,
    RunConfig,
    coerce,
    load_data_config,
    load_model_config,
    load_train_config,
    make_run_config,
    read_config_file,
    write_run_record,
)
from util.errors_util import ConfigError, PathError


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in list(os.environ):
        if key.startswith("TRAJPRED_"):
            monkeypatch.delenv(key)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_coerce_by_default_type():
    assert coerce("pose_mlp", "2, 8,32", MODEL_DEFAULTS) == (2, 8, 32)
    assert coerce("tie_blocks", "yes", MODEL_DEFAULTS) is True
    assert coerce("tie_blocks", "off", MODEL_DEFAULTS) is False
    assert coerce("epochs", "12", TRAIN_DEFAULTS) == 12
    assert coerce("lr0", "1e-3", TRAIN_DEFAULTS) == pytest.approx(1e-3)
    assert coerce("backbone", "patch", MODEL_DEFAULTS) == "patch"
    assert coerce("sdd_keep_classes", "Pedestrian, Biker", DATA_DEFAULTS) == ("Pedestrian", "Biker")
    assert coerce("crop_sizes_by_class", "Pedestrian:64,Biker:96", DATA_DEFAULTS) == (
        ("Pedestrian", 64), ("Biker", 96)
    )
    assert coerce("epochs", 7, TRAIN_DEFAULTS) == 7


def test_coerce_rejects_garbage():
    with pytest.raises(ConfigError, match="epochs"):
        coerce("epochs", "many", TRAIN_DEFAULTS)
    with pytest.raises(ConfigError):
        coerce("tie_blocks", "perhaps", MODEL_DEFAULTS)
    with pytest.raises(ConfigError):
        coerce("crop_sizes_by_class", "Pedestrian:big", DATA_DEFAULTS)


def test_precedence_defaults_file_env_override(tmp_path):
    cfg = _write(tmp_path / "train.cfg", "# run settings\nepochs=10\nbatch_size=16\n")
    env = {"TRAJPRED_EPOCHS": "20"}
    assert load_train_config().epochs == 65
    assert load_train_config(cfg, environ={}).epochs == 10
    assert load_train_config(cfg, environ=env).epochs == 20
    assert load_train_config(cfg, {"epochs": 30}, environ=env).epochs == 30
    # None overrides fall through
    resolved = load_train_config(cfg, {"epochs": None}, environ=env)
    assert resolved.epochs == 20 and resolved.batch_size == 16


def test_model_config_file(tmp_path):
    cfg = _write(tmp_path / "model.cfg", "backbone=patch\ncrop_size=32\npatch_size=8\n")
    config = load_model_config(cfg, environ={})
    assert config.image_enabled and config.patch_count == 16


def test_data_config_file(tmp_path):
    cfg = _write(tmp_path / "data.cfg", "sdd_keep_classes=Pedestrian,Biker\ncrop_sizes_by_class=Biker:96\n")
    data = load_data_config(cfg, environ={})
    assert data.sdd_keep_classes == ("Pedestrian", "Biker")
    assert data.crop_sizes == {"Biker": 96}


def test_config_file_errors(tmp_path):
    with pytest.raises(PathError):
        read_config_file(tmp_path / "missing.cfg", TRAIN_DEFAULTS)
    with pytest.raises(ConfigError, match="unknown key"):
        load_train_config(_write(tmp_path / "bad.cfg", "momentum=0.9\n"), environ={})
    with pytest.raises(ConfigError):
        load_train_config(_write(tmp_path / "empty.cfg", "epochs\n"), environ={})
    with pytest.raises(ConfigError):
        load_model_config(_write(tmp_path / "wiring.cfg", "d_model=50\n"), environ={})
    with pytest.raises(ConfigError):
        load_train_config(overrides={"depth": 3}, environ={})


def test_make_run_config_layers_env_and_flags(tmp_path):
    env = {"TRAJPRED_SPLIT": "random", "TRAJPRED_SEED": "9", "TRAJPRED_OUT": str(tmp_path / "env")}
    run = make_run_config("baseline", environ=env, out=str(tmp_path / "flag"), seed=None)
    assert run.split == "random"
    assert run.seed == 9
    assert run.out_dir == tmp_path / "flag"
    assert run.env == env


def test_make_run_config_dataset_roots_from_env(tmp_path):
    a = tmp_path / "eth"
    b = tmp_path / "hotel"
    a.mkdir()
    b.mkdir()
    run = make_run_config("prepare", environ={"TRAJPRED_DATASET_ROOTS": f"{a}{os.pathsep}{b}"})
    assert run.dataset_roots == (str(a), str(b))


def test_run_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(command="serve")
    with pytest.raises(ConfigError):
        RunConfig(command="prepare", format="kitti")
    with pytest.raises(PathError) as info:
        RunConfig(command="eval", scenes=str(tmp_path / "a.pkl"), checkpoint=str(tmp_path / "b.ckpt"))
    assert len(info.value.missing) == 2
    with pytest.raises(ConfigError):
        make_run_config("train", environ={"TRAJPRED_SEED": "abc"})
    with pytest.raises(ConfigError):
        make_run_config("train", environ={}, nonsense=1)


def test_run_config_resolves_sub_configs():
    run = make_run_config("train", environ={}, seed=5, precision="check", backbone="patch")
    assert run.train().seed == 5
    assert run.train().precision == "check"
    assert run.model().backbone == "patch"
    assert run.effective_seed() == 5
    assert make_run_config("train", environ={}).effective_seed() == TRAIN_DEFAULTS["seed"]


def test_write_run_record(tmp_path):
    run = make_run_config("gradcheck", environ={"TRAJPRED_LOG_LEVEL": "DEBUG"})
    path = write_run_record(run, tmp_path / "out", extra_value=3)
    record = json.loads(path.read_text(encoding="utf-8"))
    assert record["run"]["command"] == "gradcheck"
    assert record["run"]["log_level"] == "DEBUG"
    assert record["extra_value"] == 3
