import math

import numpy as np
import pytest

from data.trajectory import Trajectory
from util.errors_util import ContractError, DimensionError
from util.transform_util import (
    RigidTransform2D,
    apply_transform,
    compose,
    heading_transform,
    invert,
    path_length,
    transform_points,
)


def _traj(points, frame="world"):
    points = np.asarray(points, dtype=np.float64)
    return Trajectory(agent_id=1, label="Pedestrian", steps=np.arange(len(points)), points=points, frame=frame)


def test_heading_along_x_is_pure_translation():
    t = heading_transform(_traj([(0.0, 0.0), (1.0, 0.0)]))
    np.testing.assert_allclose(t.rotation, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(t.translation, [-1.0, 0.0], atol=1e-15)


def test_heading_along_y_rotates_previous_point_behind():
    t = heading_transform(_traj([(0.0, 0.0), (0.0, 1.0)]))
    np.testing.assert_allclose(transform_points(t, [0.0, 1.0]), [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(transform_points(t, [0.0, 0.0]), [-1.0, 0.0], atol=1e-12)


def test_heading_uses_last_moving_step_for_static_tail():
    t = heading_transform(_traj([(0.0, 0.0), (0.0, 2.0), (0.0, 2.0), (0.0, 2.0)]))
    assert t.angle == pytest.approx(-math.pi / 2)
    np.testing.assert_allclose(transform_points(t, [0.0, 2.0]), [0.0, 0.0], atol=1e-12)


def test_heading_of_fully_static_track_keeps_orientation():
    t = heading_transform(_traj([(3.0, 4.0)] * 5))
    np.testing.assert_allclose(t.rotation, np.eye(2))
    np.testing.assert_allclose(t.translation, [-3.0, -4.0])


def test_heading_needs_two_points():
    with pytest.raises(ContractError):
        heading_transform(_traj([(0.0, 0.0)]))


def test_random_round_trips_recover_points(rng):
    for _ in range(1000):
        t = RigidTransform2D.from_angle(rng.uniform(-math.pi, math.pi), rng.uniform(-50, 50, size=2))
        pts = rng.uniform(-100, 100, size=(3, 2))
        back = transform_points(invert(t), transform_points(t, pts))
        assert np.max(np.abs(back - pts)) < 1e-9


def test_compose_applies_inner_first(rng):
    a = RigidTransform2D.from_angle(0.3, (1.0, 2.0))
    b = RigidTransform2D.from_angle(-1.1, (-4.0, 0.5))
    pts = rng.normal(size=(5, 2))
    np.testing.assert_allclose(
        transform_points(compose(a, b), pts), transform_points(a, transform_points(b, pts)), atol=1e-12
    )
    ident = compose(a, invert(a))
    np.testing.assert_allclose(ident.rotation, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(ident.translation, [0.0, 0.0], atol=1e-12)


def test_transform_rejects_bad_rotation():
    with pytest.raises(ContractError):
        RigidTransform2D(np.array([[1.0, 0.0], [0.0, -1.0]]), np.zeros(2))
    with pytest.raises(DimensionError):
        RigidTransform2D(np.eye(3), np.zeros(2))


def test_transform_dict_round_trip():
    t = RigidTransform2D.from_angle(0.7, (2.0, -1.0))
    again = RigidTransform2D.from_dict(t.to_dict())
    np.testing.assert_array_equal(again.rotation, t.rotation)
    assert again.angle == pytest.approx(0.7)


def test_apply_identity_and_translation():
    traj = _traj([(1.0, 2.0), (3.0, 4.0)])
    same = apply_transform(RigidTransform2D.identity(), traj)
    np.testing.assert_array_equal(same.points, traj.points)
    assert same.frame == "agent"

    moved = apply_transform(RigidTransform2D(np.eye(2), [10.0, -1.0]), traj)
    np.testing.assert_allclose(moved.points, [[11.0, 1.0], [13.0, 3.0]])
    np.testing.assert_array_equal(moved.steps, traj.steps)


def test_apply_quarter_turn():
    out = apply_transform(RigidTransform2D.from_angle(math.pi / 2), _traj([(1.0, 0.0)]))
    np.testing.assert_allclose(out.points, [[0.0, 1.0]], atol=1e-12)


def test_apply_flips_frame_back():
    traj = _traj([(1.0, 0.0), (2.0, 0.0)], frame="agent")
    assert apply_transform(RigidTransform2D.identity(), traj).frame == "world"
    assert apply_transform(RigidTransform2D.identity(), traj, frame="agent").frame == "agent"


def test_path_length():
    assert path_length(_traj([(0.0, 0.0), (3.0, 4.0), (3.0, 5.0)])) == pytest.approx(6.0)
    assert path_length(_traj([(2.0, 2.0)])) == 0.0
