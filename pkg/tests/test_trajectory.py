from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fleetsim.transforms import quat_from_axis_angle, yaw_of
from fleetsim.trajectory import (
    Alignment,
    SchemaError,
    TooFewWaypoints,
    Trajectory,
    Waypoint,
    apply_alignment,
    deserialize_scene,
    find,
    sample,
    serialize_scene,
)

TOL = 1e-9


def line(*points, times=None):
    times = times or range(len(points))
    return Trajectory("t", tuple(Waypoint(p, t) for p, t in zip(points, times)))


def test_exact_at_knots():
    q = quat_from_axis_angle((0, 0, 1), 1.0)
    traj = Trajectory("t", (Waypoint((0, 0, 0), 0.0), Waypoint((1, 2, 3), 2.0, q), Waypoint((5, 5, 5), 3.0)))
    for w in traj.waypoints:
        assert sample(traj, w.t) == (w.position, w.orientation)


def test_linear_midpoint():
    traj = line((0, 0, 0), (2, 0, 0), times=[0.0, 4.0])
    assert sample(traj, 1.0)[0] == pytest.approx((0.5, 0, 0), abs=TOL)


def test_clamping():
    traj = line((0, 0, 0), (2, 0, 0), times=[1.0, 4.0])
    assert sample(traj, 0.0)[0] == (0.0, 0.0, 0.0)
    assert sample(traj, 99.0)[0] == (2.0, 0.0, 0.0)


def test_orientation_interpolated():
    q = quat_from_axis_angle((0, 0, 1), math.pi / 2)
    traj = Trajectory("t", (Waypoint((0, 0, 0), 0.0), Waypoint((0, 0, 0), 2.0, q)))
    assert yaw_of(sample(traj, 1.0)[1]) == pytest.approx(math.pi / 4, abs=TOL)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(1e-7, 1e-5))
def test_continuity(t, eps):
    traj = line((0, 0, 0), (1, 5, 2), (4, -1, 0), (4, 4, 4))
    a, b = np.array(sample(traj, t)[0]), np.array(sample(traj, t + eps)[0])
    assert np.linalg.norm(a - b) < 1e-3


def test_times_strictly_increasing():
    with pytest.raises(SchemaError):
        line((0, 0, 0), (1, 0, 0), times=[1.0, 1.0])
    with pytest.raises(SchemaError):
        Waypoint((0, 0, 0), -1.0)
    with pytest.raises(SchemaError):
        Trajectory("t", ())


def test_align_along_x_is_identity():
    out = apply_alignment(line((0, 0, 0), (1, 0, 0)), Alignment.ALIGN_TO_NEXT)
    for w in out.waypoints:
        assert np.allclose(w.orientation, (1, 0, 0, 0), atol=TOL)


@pytest.mark.parametrize("mode", [Alignment.ALIGN_TO_NEXT, Alignment.ALIGN_TO_PREVIOUS])
def test_align_along_y_is_quarter_turn(mode):
    out = apply_alignment(line((0, 0, 0), (0, 1, 0)), mode)
    for w in out.waypoints:
        assert math.degrees(yaw_of(w.orientation)) == pytest.approx(90.0, abs=1e-9)


def test_align_previous_uses_incoming_direction():
    out = apply_alignment(line((0, 0, 0), (1, 0, 0), (1, 1, 0)), Alignment.ALIGN_TO_PREVIOUS)
    yaws = [math.degrees(yaw_of(w.orientation)) for w in out.waypoints]
    assert yaws == pytest.approx([0.0, 0.0, 90.0], abs=1e-9)


def test_align_pitch_for_climb():
    out = apply_alignment(line((0, 0, 0), (1, 0, 1)), Alignment.ALIGN_TO_NEXT)
    w, x, y, z = out.waypoints[0].orientation
    # body x axis rotated onto (1, 0, 1) / sqrt 2
    forward = (1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y))
    assert forward == pytest.approx((math.sqrt(0.5), 0.0, math.sqrt(0.5)), abs=TOL)


def test_coincident_waypoints_keep_orientation():
    q = quat_from_axis_angle((0, 0, 1), 0.3)
    traj = Trajectory("t", (Waypoint((1, 1, 0), 0.0, q), Waypoint((1, 1, 0), 1.0, q)))
    out = apply_alignment(traj, Alignment.ALIGN_TO_NEXT)
    assert out.waypoints[0].orientation == q


def test_manual_is_noop_and_short_trajectories_rejected():
    traj = line((0, 0, 0))
    assert apply_alignment(traj, Alignment.MANUAL) is traj
    with pytest.raises(TooFewWaypoints):
        apply_alignment(traj, Alignment.ALIGN_TO_NEXT)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[st.integers(-50, 50)] * 3), min_size=2, max_size=6),
       st.tuples(*[st.integers(-100, 100)] * 3))
def test_alignment_translation_invariant(points, offset):
    # integer coordinates keep the shifted directions exact
    shifted = [tuple(p + o for p, o in zip(pt, offset)) for pt in points]
    for mode in (Alignment.ALIGN_TO_NEXT, Alignment.ALIGN_TO_PREVIOUS):
        a = apply_alignment(line(*points), mode)
        b = apply_alignment(line(*shifted), mode)
        for wa, wb in zip(a.waypoints, b.waypoints):
            assert np.allclose(wa.orientation, wb.orientation, atol=TOL, rtol=0)


def test_empty_scene_round_trip():
    text = serialize_scene([])
    assert text.strip() == "trajectories: []"
    assert deserialize_scene(text) == []


def test_scene_round_trip():
    q = quat_from_axis_angle((0, 1, 0), 0.7)
    traj = Trajectory("patrol", (Waypoint((0.1, 0.2, 0.3), 0.0), Waypoint((1, 2, 3), 2.5, q)), "map")
    (back,) = deserialize_scene(serialize_scene([traj]))
    assert back.name == "patrol" and back.frame == "map"
    for a, b in zip(back.waypoints, traj.waypoints):
        assert a.t == b.t
        assert np.allclose(a.position, b.position, atol=TOL, rtol=0)
        assert np.allclose(a.orientation, b.orientation, atol=TOL, rtol=0)


@pytest.mark.parametrize("text", [
    "{}",
    "trajectories: 3",
    "trajectories: [{name: a, frame: map}]",
    "trajectories: [{name: a, frame: map, waypoints: [{t: 0, position: [0, 0]}]}]",
    "trajectories: [{name: a, frame: map, waypoints: [{t: 1, position: [0, 0, 0], orientation_wxyz: [1, 0, 0, 0]},"
    " {t: 0, position: [0, 0, 0], orientation_wxyz: [1, 0, 0, 0]}]}]",
    "trajectories: [",
])
def test_bad_scenes(text):
    with pytest.raises(SchemaError):
        deserialize_scene(text)


def test_find():
    traj = line((0, 0, 0))
    assert find([traj], "t") is traj
    with pytest.raises(KeyError):
        find([traj], "nope")
