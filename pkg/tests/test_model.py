from dataclasses import replace

import numpy as np
import pytest

from applications.gradcheck_app import check_model_gradients, gradcheck_model_config
from data.synthetic import synthetic_scenes
from data.trajectory import Trajectory
from model.batch import collate
from model.blocks import encoder_block
from model.config import ModelConfig
from model.decoders import decode_goal, decode_trajectory
from model.embedding import embed_tokens, positional_encoding
from model.params import init_params
from model.predictor import TrajectoryPredictor, encode, forward
from util.errors_util import ConfigError, ContractError


def _model(config, seed=0):
    return TrajectoryPredictor(config, init_params(config, seed))


@pytest.fixture
def crowded():
    return synthetic_scenes(1, seed=11, kinds=("curved",), min_neighbors=3, max_neighbors=3)[0]


# -----------------------------------------------------------------------------
# config and parameters
# -----------------------------------------------------------------------------
def test_default_config_wiring():
    config = ModelConfig()
    assert config.goal_mlp[0] == config.latent_len * config.d_model == 576
    assert config.traj_mlp == (50, 256, 64, 24)
    assert config.pose_dim + config.pe_dim == config.d_model


def test_config_rejects_bad_wiring():
    with pytest.raises(ConfigError):
        ModelConfig(d_model=50)
    with pytest.raises(ConfigError):
        ModelConfig.small(backbone="resnet")
    with pytest.raises(ConfigError):
        ModelConfig.small(backbone="patch", crop_size=20)
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"d_model": 12, "depth": 3})


def test_init_is_seeded_and_precision_independent(small_config):
    a = init_params(small_config, seed=4)
    b = init_params(small_config, seed=4)
    np.testing.assert_array_equal(a.flat_view(), b.flat_view())
    fast = init_params(small_config, seed=4, dtype=np.float32)
    np.testing.assert_array_equal(fast.flat_view(), a.flat_view().astype(np.float32))
    assert not np.array_equal(init_params(small_config, seed=5).flat_view(), a.flat_view())


def test_tied_blocks_share_parameters(small_config):
    tied = ModelConfig.small(tie_blocks=True, n_blocks=3)
    names = init_params(tied).names()
    assert any(n.startswith("blocks.shared.") for n in names)
    assert init_params(tied).total_size < init_params(ModelConfig.small(n_blocks=3)).total_size


def test_mismatched_params_rejected(small_config):
    with pytest.raises(ConfigError):
        TrajectoryPredictor(ModelConfig.small(n_blocks=3), init_params(small_config))


def test_positional_encoding_rows():
    pe = positional_encoding(3, 4)
    np.testing.assert_allclose(pe[0], [0.0, 1.0, 0.0, 1.0])
    np.testing.assert_allclose(pe[1], [np.sin(1.0), np.cos(1.0), np.sin(np.exp(-1.0)), np.cos(np.exp(-1.0))])


# -----------------------------------------------------------------------------
# batches
# -----------------------------------------------------------------------------
def test_collate_pads_neighbors(small_config, scenes):
    lonely = replace(scenes[0], neighbors=[])
    busy = synthetic_scenes(1, seed=2, min_neighbors=2, max_neighbors=2)[0]
    batch = collate([lonely, busy], small_config)
    assert batch.neighbors.shape == (2, 2, 8, 2)
    assert not batch.neighbor_mask[0].any()
    assert batch.future.shape == (2, 12, 2)
    # agent-centric: last observed point at the origin
    np.testing.assert_allclose(batch.observed[:, -1], 0.0, atol=1e-12)


def test_collate_rejects_horizon_mismatch(small_config):
    short = synthetic_scenes(1, t_obs=6, t_pred=12)[0]
    with pytest.raises(ContractError):
        collate([short], small_config)
    with pytest.raises(ContractError):
        collate([], small_config)


# -----------------------------------------------------------------------------
# forward
# -----------------------------------------------------------------------------
def test_prediction_shapes(small_config, scenes):
    model = _model(small_config)
    preds = model.predict(scenes, batch_size=4)
    assert len(preds) == len(scenes)
    for pred, scene in zip(preds, scenes):
        assert pred.goal.shape == (2,)
        assert pred.trajectory.shape == (12, 2)
        assert pred.scene_id == scene.scene_id
        assert np.all(np.isfinite(pred.world_trajectory()))


def test_single_scene_forward_matches_batch(small_config, scenes):
    params = init_params(small_config, seed=1)
    single = forward(scenes[1], params, small_config)
    batched = TrajectoryPredictor(small_config, params).predict(scenes)[1]
    np.testing.assert_allclose(single.trajectory, batched.trajectory, atol=1e-12)


def test_neighbor_order_does_not_matter(small_config, crowded):
    params = init_params(small_config, seed=2)
    z = encode(crowded, params, small_config)
    z_rev = encode(replace(crowded, neighbors=crowded.neighbors[::-1]), params, small_config)
    assert z.shape == (small_config.latent_len, small_config.d_model)
    assert np.max(np.abs(z - z_rev)) < 1e-6


def test_inference_never_reads_the_future(small_config, crowded):
    model = _model(small_config, seed=3)
    base = model.predict([crowded])[0]
    moved = crowded.future.with_points(crowded.future.points + 100.0, "world")
    for scene in (crowded.without_future(), replace(crowded, future=moved)):
        other = model.predict([scene])[0]
        assert np.array_equal(base.goal, other.goal)
        assert np.array_equal(base.trajectory, other.trajectory)


def test_teacher_forcing_uses_the_true_endpoint(small_config, crowded):
    model = _model(small_config, seed=3)
    tf = model.predict([crowded], "teacher_forced")[0]
    inf = model.predict([crowded], "inference")[0]
    np.testing.assert_array_equal(tf.goal, inf.goal)
    assert not np.allclose(tf.trajectory, inf.trajectory)
    with pytest.raises(ContractError):
        forward(crowded.without_future(), model.params, small_config, "teacher_forced")
    with pytest.raises(ConfigError):
        model.predict([crowded], "sampling")


def test_time_reversal_changes_the_encoding(small_config, crowded):
    params = init_params(small_config, seed=4)
    reversed_obs = crowded.observed.with_points(crowded.observed.points[::-1], "world")
    z = encode(crowded, params, small_config)
    z_rev = encode(replace(crowded, observed=reversed_obs, neighbors=[]), params, small_config)
    z_plain = encode(replace(crowded, neighbors=[]), params, small_config)
    assert np.max(np.abs(z_plain - z_rev)) > 1e-6
    assert np.max(np.abs(z - z_plain)) > 1e-6


def test_null_token_only_matters_without_neighbors(small_config, crowded):
    params = init_params(small_config, seed=5)
    alone = replace(crowded, neighbors=[])
    before_alone = encode(alone, params, small_config)
    before_crowd = encode(crowded, params, small_config)
    assert np.all(np.isfinite(before_alone))

    params["null_token"].tensor[...] += 1.0
    assert np.max(np.abs(encode(alone, params, small_config) - before_alone)) > 1e-6
    np.testing.assert_allclose(encode(crowded, params, small_config), before_crowd, atol=1e-12)


def test_patch_backbone_sees_the_image(patch_config, image_scenes):
    model = _model(patch_config, seed=6)
    base = model.predict(image_scenes)
    assert all(np.all(np.isfinite(p.trajectory)) for p in base)
    dark = [replace(s, image=replace(s.image, pixels=np.zeros_like(s.image.pixels))) for s in image_scenes]
    other = model.predict(dark)
    assert any(not np.allclose(a.goal, b.goal) for a, b in zip(base, other))


def test_patch_backbone_needs_images(patch_config, scenes):
    with pytest.raises(ContractError):
        _model(patch_config).predict(scenes[:1])


def test_functional_helpers_agree_with_model(small_config, crowded):
    params = init_params(small_config, seed=7)
    model = TrajectoryPredictor(small_config, params)
    batch = model.collate([crowded])
    goal, traj, _ = model.forward_batch(batch)
    z = model.encode_batch(batch)
    np.testing.assert_allclose(decode_goal(z, params, small_config), goal, atol=1e-12)
    np.testing.assert_allclose(decode_trajectory(z, goal, params, small_config), traj, atol=1e-12)

    agent = Trajectory(0, "Pedestrian", np.arange(8), batch.observed[0], frame="agent")
    tokens = embed_tokens(agent, params, small_config)
    assert tokens.shape == (8, small_config.d_model)
    with pytest.raises(ContractError):
        embed_tokens(crowded.observed, params, small_config)

    latent = np.broadcast_to(params["latent"].tensor, (1,) + params["latent"].tensor.shape).copy()
    out = encoder_block(latent, tokens[None], tokens[None], params=params, config=small_config)
    assert out.shape == (1, small_config.latent_len, small_config.d_model)


def test_encode_without_blocks_returns_the_latent(crowded):
    config = ModelConfig(n_blocks=0)
    params = init_params(config, seed=5)
    np.testing.assert_array_equal(encode(crowded, params, config), params["latent"].tensor)

    # with nothing attending, only the latent and the decoders receive gradient
    model = TrajectoryPredictor(config, params)
    goal, traj, cache = model.forward_batch(model.collate([crowded]), "teacher_forced")
    model.backward(np.ones_like(goal), np.ones_like(traj), cache)
    assert np.abs(params["latent"].grad).sum() > 0
    assert np.abs(params["goal.0.W"].grad).sum() > 0
    assert not params["pose.0.W"].grad.any()
    assert not params["null_token"].grad.any()


# -----------------------------------------------------------------------------
# gradients
# -----------------------------------------------------------------------------
def test_gradcheck_config_fits_the_synthetic_image():
    config = gradcheck_model_config(ModelConfig())
    assert config.backbone == "patch" and config.n_blocks == 4
    assert config.crop_size == 16 and config.crop_size % config.patch_size == 0


def test_small_model_gradients_match_finite_differences(small_config):
    reports = check_model_gradients(gradcheck_model_config(small_config), seed=1, probe_count=16)
    assert set(reports) == {"teacher_forced", "inference"}
    for report in reports.values():
        assert report.probes > 0
        assert report.max_rel_err < 1e-4


@pytest.mark.slow
def test_default_model_gradients_match_finite_differences():
    config = gradcheck_model_config(ModelConfig())
    reports = check_model_gradients(config, seed=0, probe_count=16)
    for mode, report in reports.items():
        assert report.probes == 16, mode
        assert report.max_rel_err < 1e-4, (mode, report.worst_param)
