"""Trajectory primitives: resampling, vectorization, scene slicing."""
from __future__ import annotations

import numpy as np
import pytest

from intersim.core import (
    FEATURE_DIM,
    AgentKind,
    Trajectory,
    TrajectoryFeature,
    resample_uniform,
    slice_scene,
    vectorize_trajectory,
)
from intersim.errors import EmptyScene, InvalidInput


def make_line(t0=0.0, dt=0.4, n=20, start=(0.0, 0.0), vel=(1.0, 0.5), **kw):
    start = np.asarray(start, dtype=float)
    vel = np.asarray(vel, dtype=float)
    ts = np.arange(n)[:, None] * dt
    pts = start[None, :] + ts * vel[None, :]
    kw.setdefault("agent_id", 0)
    kw.setdefault("kind", AgentKind.PEDESTRIAN)
    return Trajectory(t0=t0, dt=dt, points=pts, **kw)


# ---------------------------------------------------------------- resampling


def test_resample_snaps_to_existing_samples():
    """Resampling a uniform input at a multiple of its rate reuses samples bitwise."""
    rng = np.random.default_rng(0)
    pts = rng.normal(0, 5, (30, 2))
    raw = [(0.1 * i, pts[i]) for i in range(30)]
    out = resample_uniform(raw, 0.4)
    assert out.dt == 0.4
    # every 4th raw sample, no interpolation error at all
    assert out.n == 8
    assert np.array_equal(out.points, pts[::4][:8])


def test_resample_linear_interpolation_oracle():
    # two samples, query lands halfway: answer is the midpoint
    raw = [(0.0, np.array([0.0, 0.0])), (1.0, np.array([2.0, -4.0]))]
    out = resample_uniform(raw, 0.5)
    assert out.n == 3
    np.testing.assert_allclose(out.points[1], [1.0, -2.0], atol=1e-12)


def test_resample_drops_trailing_remainder():
    # span 0.9 s at dt 0.4 -> grid 0.0, 0.4, 0.8; the last 0.1 s is dropped
    raw = [(0.3 * i, np.array([float(i), 0.0])) for i in range(4)]
    out = resample_uniform(raw, 0.4)
    assert out.n == 3
    np.testing.assert_allclose(out.points[:, 0], [0.0, 4.0 / 3.0, 8.0 / 3.0], atol=1e-12)


def test_resample_idempotent():
    rng = np.random.default_rng(3)
    raw = [(0.05 * i + 0.01 * rng.random(), rng.normal(0, 2, 2)) for i in range(50)]
    raw.sort(key=lambda x: x[0])
    once = resample_uniform(raw, 0.4)
    twice = resample_uniform(list(zip(once.t0 + np.arange(once.n) * once.dt, once.points)), 0.4)
    assert np.array_equal(once.points, twice.points)
    assert once.t0 == twice.t0


def test_resample_rejects_bad_input():
    with pytest.raises(InvalidInput):
        resample_uniform([(0.0, np.zeros(2))], 0.4)
    with pytest.raises(InvalidInput):
        resample_uniform([(0.0, np.zeros(2)), (0.0, np.ones(2))], 0.4)
    with pytest.raises(InvalidInput):
        resample_uniform([(0.0, np.zeros(2)), (1.0, np.ones(2))], -0.1)
    with pytest.raises(InvalidInput):
        resample_uniform([(0.0, np.zeros(2)), (1.0, np.array([np.nan, 0.0]))], 0.4)


# -------------------------------------------------------------- vectorizing


def test_vectorize_straight_line():
    tr = make_line(n=21, dt=0.5, start=(1.0, 2.0), vel=(2.0, -1.0))
    f = vectorize_trajectory(tr, k=20)
    np.testing.assert_allclose(f.entry_pos, [1.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(f.entry_vel, [2.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(f.exit_vel, [2.0, -1.0], atol=1e-12)
    # way-point j is the point at time j*T/k; for a line that is exact
    T = tr.duration
    for j in range(1, 21):
        expect = np.array([1.0, 2.0]) + (j * T / 20) * np.array([2.0, -1.0])
        np.testing.assert_allclose(f.waypoints[j - 1], expect, atol=1e-9)
    assert f.duration_T == T


def test_vectorize_last_waypoint_is_exact_endpoint():
    rng = np.random.default_rng(7)
    pts = rng.normal(0, 3, (17, 2))
    tr = Trajectory(agent_id=1, kind=AgentKind.VEHICLE, t0=0.0, dt=0.4, points=pts)
    f = vectorize_trajectory(tr)
    assert np.array_equal(f.waypoints[-1], pts[-1])
    assert np.array_equal(f.exit_pos, pts[-1])


def test_vectorize_velocity_window():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [6.0, 0.0]])
    tr = Trajectory(agent_id=0, kind=AgentKind.VEHICLE, t0=0.0, dt=1.0, points=pts)
    f1 = vectorize_trajectory(tr, vel_window=1)
    f2 = vectorize_trajectory(tr, vel_window=2)
    assert f1.entry_vel[0] == pytest.approx(1.0)
    assert f2.entry_vel[0] == pytest.approx(1.5)  # (3-0)/2
    assert f1.exit_vel[0] == pytest.approx(3.0)
    assert f2.exit_vel[0] == pytest.approx(2.5)  # (6-1)/2
    with pytest.raises(InvalidInput):
        vectorize_trajectory(tr, vel_window=4)


def test_feature_flatten_round_trip():
    rng = np.random.default_rng(5)
    f = TrajectoryFeature(
        entry_pos=rng.normal(size=2),
        entry_vel=rng.normal(size=2),
        exit_pos=rng.normal(size=2),
        exit_vel=rng.normal(size=2),
        waypoints=rng.normal(size=(20, 2)),
        duration_T=7.5,
    )
    vec = f.flatten()
    assert vec.shape == (FEATURE_DIM,)
    back = TrajectoryFeature.from_flat(vec)
    assert np.array_equal(back.flatten(), vec)
    with pytest.raises(InvalidInput):
        TrajectoryFeature.from_flat(vec[:-1])


def test_position_at_clamps_to_ends():
    tr = make_line(n=5)
    np.testing.assert_array_equal(tr.position_at(-1.0), tr.points[0])
    np.testing.assert_array_equal(tr.position_at(999.0), tr.points[-1])


# ------------------------------------------------------------ scene slicing


def test_slice_scene_masks_and_offsets():
    dt = 0.4
    a = make_line(t0=0.0, dt=dt, n=30, agent_id=1)
    b = make_line(t0=10 * dt, dt=dt, n=30, agent_id=2, start=(5.0, 5.0))
    sc = slice_scene([a, b], start=5, length=20)
    assert sc.ids == [1, 2]
    # agent 1 spans frames 0..29, fully inside [5, 25)
    assert sc.mask[0].all()
    # agent 2 starts at global frame 10 -> first 5 window frames absent
    assert not sc.mask[1, :5].any() and sc.mask[1, 5:].all()
    assert sc.entry_offset[0] == -5
    assert sc.entry_offset[1] == 5
    # local clock: window frame 5 is 10*dt into agent 1's life, 0 for agent 2
    assert sc.agent_local_time(0, 5) == pytest.approx(10 * dt)
    assert sc.agent_local_time(1, 5) == pytest.approx(0.0)
    # masked positions are NaN, present ones match the source
    assert np.isnan(sc.positions[1, :5]).all()
    np.testing.assert_array_equal(sc.positions[1, 5], b.points[0])
    np.testing.assert_array_equal(sc.positions[0, 5], a.points[10])


def test_slice_scene_excludes_thin_overlap():
    dt = 0.4
    a = make_line(t0=0.0, dt=dt, n=30, agent_id=1)
    # agent overlapping the window by exactly one frame is dropped
    c = make_line(t0=24 * dt, dt=dt, n=10, agent_id=3)
    sc = slice_scene([a, c], start=5, length=20)
    assert sc.ids == [1]
    sc2 = slice_scene([a, c], start=5, length=21)  # now 2 frames overlap
    assert sc2.ids == [1, 3]


def test_slice_scene_errors():
    a = make_line(n=10)
    with pytest.raises(InvalidInput):
        slice_scene([a], start=0, length=1)
    with pytest.raises(EmptyScene):
        slice_scene([], start=0, length=10)
    with pytest.raises(EmptyScene):
        slice_scene([a], start=500, length=10)
    b = make_line(n=10, dt=0.5)
    with pytest.raises(InvalidInput):
        slice_scene([a, b], start=0, length=10)


def test_trajectory_validation():
    with pytest.raises(InvalidInput):
        Trajectory(agent_id=0, kind=AgentKind.PEDESTRIAN, t0=0, dt=0.4, points=np.zeros((1, 2)))
    with pytest.raises(InvalidInput):
        Trajectory(agent_id=0, kind=AgentKind.PEDESTRIAN, t0=0, dt=0.0, points=np.zeros((5, 2)))
    with pytest.raises(InvalidInput):
        Trajectory(agent_id=0, kind=AgentKind.PEDESTRIAN, t0=0, dt=0.4, points=np.zeros((5, 3)))
    bad = np.zeros((5, 2))
    bad[2, 0] = np.inf
    with pytest.raises(InvalidInput):
        Trajectory(agent_id=0, kind=AgentKind.PEDESTRIAN, t0=0, dt=0.4, points=bad)
    assert AgentKind.from_str("veh") is AgentKind.VEHICLE
    with pytest.raises(InvalidInput):
        AgentKind.from_str("bike")
