"""Domain types and trajectory primitives.

Trajectories are uniform-rate 2-D position sequences in meters, one per
agent, timestamped in seconds since the dataset epoch (midnight local
time).  Everything downstream (mixture fitting, spline priors, scene
extraction) works off these types.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyScene, InvalidInput

WAYPOINT_COUNT = 20
FEATURE_DIM = 2 * WAYPOINT_COUNT + 9  # entry/exit pos+vel (8) + waypoints (40) + duration (1)

# Grid times are snapped to raw sample times within this tolerance so that
# resampling an already-uniform trajectory reproduces it bitwise.
_TIME_SNAP = 1e-9


class AgentKind(enum.Enum):
    PEDESTRIAN = "ped"
    VEHICLE = "veh"

    @classmethod
    def from_str(cls, s: str) -> "AgentKind":
        for k in cls:
            if k.value == s:
                return k
        raise InvalidInput(f"unknown agent kind {s!r}")


@dataclass
class Trajectory:
    """Uniform-rate position sequence of one agent."""

    agent_id: int
    kind: AgentKind
    t0: float
    dt: float
    points: np.ndarray  # (N, 2) float64

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise InvalidInput("points must be an (N, 2) array")
        if self.points.shape[0] < 2:
            raise InvalidInput("trajectory needs at least 2 samples")
        if not self.dt > 0:
            raise InvalidInput("dt must be strictly positive")
        if not np.isfinite(self.points).all():
            raise InvalidInput("trajectory contains non-finite coordinates")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def duration(self) -> float:
        return (self.n - 1) * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration

    def position_at(self, t_local: float) -> np.ndarray:
        """Linear interpolation at a time relative to the first sample."""
        t_local = min(max(t_local, 0.0), self.duration)
        u = t_local / self.dt
        i = min(int(u), self.n - 2)
        frac = u - i
        return (1.0 - frac) * self.points[i] + frac * self.points[i + 1]


@dataclass
class TrajectoryFeature:
    """Vectorized summary of a trajectory: boundary state, even way-points, duration.

    Flattened layout (length 49 for the default 20 way-points):
    [entry_pos(2), entry_vel(2), exit_pos(2), exit_vel(2), waypoints(2K), T].
    """

    entry_pos: np.ndarray
    entry_vel: np.ndarray
    exit_pos: np.ndarray
    exit_vel: np.ndarray
    waypoints: np.ndarray  # (K, 2)
    duration_T: float

    def __post_init__(self):
        self.entry_pos = np.asarray(self.entry_pos, dtype=float).reshape(2)
        self.entry_vel = np.asarray(self.entry_vel, dtype=float).reshape(2)
        self.exit_pos = np.asarray(self.exit_pos, dtype=float).reshape(2)
        self.exit_vel = np.asarray(self.exit_vel, dtype=float).reshape(2)
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if self.waypoints.ndim != 2 or self.waypoints.shape[1] != 2:
            raise InvalidInput("waypoints must be a (K, 2) array")
        if not self.duration_T > 0:
            raise InvalidInput("duration must be strictly positive")

    @property
    def k(self) -> int:
        return self.waypoints.shape[0]

    def flatten(self) -> np.ndarray:
        vec = np.concatenate(
            [
                self.entry_pos,
                self.entry_vel,
                self.exit_pos,
                self.exit_vel,
                self.waypoints.reshape(-1),
                [self.duration_T],
            ]
        )
        if not np.isfinite(vec).all():
            raise InvalidInput("feature vector contains non-finite entries")
        return vec

    @classmethod
    def from_flat(cls, vec: np.ndarray, k: int = WAYPOINT_COUNT) -> "TrajectoryFeature":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.shape[0] != 2 * k + 9:
            raise InvalidInput(f"expected flat feature of length {2 * k + 9}, got {vec.shape[0]}")
        return cls(
            entry_pos=vec[0:2],
            entry_vel=vec[2:4],
            exit_pos=vec[4:6],
            exit_vel=vec[6:8],
            waypoints=vec[8 : 8 + 2 * k].reshape(k, 2),
            duration_T=float(vec[8 + 2 * k]),
        )


@dataclass
class Scene:
    """Fixed-length window over the corpus, with per-agent presence masks.

    positions[a, f] is the position of agent a at window frame f and is NaN
    wherever mask[a, f] is False.  entry_offset[a] is the window frame at
    which the agent's source trajectory begins (negative when it started
    before the window), so frame f is (f - entry_offset[a]) * dt seconds
    into the agent's own clock.
    """

    start_index: int
    length: int
    dt: float
    ids: list[int]
    kinds: list[AgentKind]
    positions: np.ndarray  # (A, length, 2)
    mask: np.ndarray  # (A, length) bool
    entry_offset: np.ndarray  # (A,) int
    priors: list | None = None  # filled by scene extraction (PriorTrajectory per agent)

    @property
    def n_agents(self) -> int:
        return len(self.ids)

    def agent_local_time(self, agent: int, frame: int) -> float:
        return (frame - int(self.entry_offset[agent])) * self.dt


def resample_uniform(
    raw,
    dt_out: float,
    *,
    agent_id: int = 0,
    kind: AgentKind = AgentKind.PEDESTRIAN,
) -> Trajectory:
    """Resample an irregular (time, position) sequence onto a uniform grid.

    The grid starts at the first raw time with spacing dt_out and extends to
    the largest multiple of dt_out that fits inside the raw time span (any
    sub-step remainder at the end is dropped).  Positions come from linear
    interpolation between the bracketing raw samples; grid times that land
    on a raw sample reuse its position exactly.
    """
    times = np.asarray([t for t, _ in raw], dtype=float)
    points = np.asarray([p for _, p in raw], dtype=float).reshape(-1, 2)
    if times.shape[0] < 2:
        raise InvalidInput("need at least 2 samples to resample")
    if not (np.diff(times) > 0).all():
        raise InvalidInput("sample times must be strictly increasing")
    if not (np.isfinite(times).all() and np.isfinite(points).all()):
        raise InvalidInput("non-finite input sample")
    if not dt_out > 0:
        raise InvalidInput("dt_out must be strictly positive")

    span = times[-1] - times[0]
    n_out = int(np.floor(span / dt_out + _TIME_SNAP)) + 1
    out = np.empty((n_out, 2), dtype=float)
    snap = _TIME_SNAP * max(1.0, abs(times[-1]))
    for k in range(n_out):
        t = times[0] + k * dt_out
        i = int(np.searchsorted(times, t, side="right")) - 1
        i = min(max(i, 0), times.shape[0] - 2)
        if abs(t - times[i]) <= snap:
            out[k] = points[i]
        elif abs(t - times[i + 1]) <= snap:
            out[k] = points[i + 1]
        else:
            frac = (t - times[i]) / (times[i + 1] - times[i])
            out[k] = (1.0 - frac) * points[i] + frac * points[i + 1]
    return Trajectory(agent_id=agent_id, kind=kind, t0=float(times[0]), dt=float(dt_out), points=out)


def vectorize_trajectory(
    traj: Trajectory, k: int = WAYPOINT_COUNT, vel_window: int = 1
) -> TrajectoryFeature:
    """Reduce a trajectory to its boundary state plus k evenly spaced way-points.

    Way-point j (1-based) is the linear interpolation of the trajectory at
    time j*T/k; entry and exit velocities are one-sided finite differences
    over vel_window sampling steps.
    """
    n = traj.n
    if n < 2:
        raise InvalidInput("trajectory shorter than 2 samples")
    if n - 1 < vel_window:
        raise InvalidInput("velocity window exceeds trajectory length")
    t_total = traj.duration
    pts = traj.points
    w = vel_window
    entry_vel = (pts[w] - pts[0]) / (w * traj.dt)
    exit_vel = (pts[n - 1] - pts[n - 1 - w]) / (w * traj.dt)
    waypoints = np.empty((k, 2), dtype=float)
    for j in range(1, k + 1):
        waypoints[j - 1] = traj.position_at(j * t_total / k)
    # Exit way-point is the last sample exactly, not a rounded interpolation.
    waypoints[k - 1] = pts[n - 1]
    return TrajectoryFeature(
        entry_pos=pts[0].copy(),
        entry_vel=entry_vel,
        exit_pos=pts[n - 1].copy(),
        exit_vel=exit_vel,
        waypoints=waypoints,
        duration_T=float(t_total),
    )


def slice_scene(trajs: list[Trajectory], start: int, length: int) -> Scene:
    """Cut a window of `length` frames starting at global frame `start`.

    Global frame f sits at time f * dt on the shared clock; a trajectory's
    own frame base is round(t0 / dt).  Agents overlapping the window by at
    least 2 frames are included with contiguous presence masks.
    """
    if length < 2:
        raise InvalidInput("scene length must be at least 2 frames")
    if not trajs:
        raise EmptyScene("no trajectories")
    dt = trajs[0].dt
    for tr in trajs:
        if abs(tr.dt - dt) > 1e-9:
            raise InvalidInput("all trajectories must share one sampling rate")

    ids, kinds, rows, masks, offsets = [], [], [], [], []
    for tr in trajs:
        base = int(round(tr.t0 / dt))
        lo = max(start, base)
        hi = min(start + length, base + tr.n)
        if hi - lo < 2:
            continue
        mask = np.zeros(length, dtype=bool)
        mask[lo - start : hi - start] = True
        row = np.full((length, 2), np.nan)
        row[lo - start : hi - start] = tr.points[lo - base : hi - base]
        ids.append(tr.agent_id)
        kinds.append(tr.kind)
        rows.append(row)
        masks.append(mask)
        offsets.append(base - start)
    if not ids:
        raise EmptyScene(f"no agent overlaps frames [{start}, {start + length})")
    return Scene(
        start_index=start,
        length=length,
        dt=dt,
        ids=ids,
        kinds=kinds,
        positions=np.stack(rows),
        mask=np.stack(masks),
        entry_offset=np.asarray(offsets, dtype=int),
    )
