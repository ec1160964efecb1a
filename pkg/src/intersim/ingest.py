"""Corpus loading, filtering, synthesis and scene extraction.

The on-disk corpus is JSON lines, one trajectory per line:

    {"agent_id": 7, "kind": "veh", "t0": 30612.4, "dt": 0.0333,
     "points": [[x, y], ...], "route": "veh:E->N"}

"route" is optional metadata and is ignored by the loader.  The synthetic
generator builds a four-way intersection: vehicles follow lane centerlines
(straight or turning through a quarter arc), pedestrians follow crossing
lines offset from the roads, and a fraction of turning vehicles yield to a
pedestrian timed to meet them, which puts an occupancy-to-slowdown pattern
into the data.  Start times follow a two-peak daily profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AgentKind,
    Scene,
    Trajectory,
    WAYPOINT_COUNT,
    resample_uniform,
    slice_scene,
    vectorize_trajectory,
)
from .errors import EmptyScene, InvalidInput, InvalidRegion, ParseError
from .spline import prior_from_feature

_REQUIRED_KEYS = ("agent_id", "kind", "t0", "dt", "points")


# ---------------------------------------------------------------------------
# corpus I/O

def load_corpus(path, strict: bool = True) -> list[Trajectory]:
    """Read a JSONL trajectory corpus.

    Strict mode raises ParseError with the 1-based line number on the first
    malformed line; lenient mode skips malformed lines.
    """
    trajs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                for key in _REQUIRED_KEYS:
                    if key not in obj:
                        raise KeyError(f"missing key {key!r}")
                traj = Trajectory(
                    agent_id=int(obj["agent_id"]),
                    kind=AgentKind.from_str(obj["kind"]),
                    t0=float(obj["t0"]),
                    dt=float(obj["dt"]),
                    points=np.asarray(obj["points"], dtype=float),
                )
            except Exception as exc:
                if strict:
                    raise ParseError(lineno, str(exc)) from exc
                continue
            trajs.append(traj)
    return trajs


def save_corpus(trajs: list[Trajectory], path, labels: dict[int, str] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tr in trajs:
            obj = {
                "agent_id": tr.agent_id,
                "kind": tr.kind.value,
                "t0": tr.t0,
                "dt": tr.dt,
                "points": [[float(x), float(y)] for x, y in tr.points],
            }
            if labels and tr.agent_id in labels:
                obj["route"] = labels[tr.agent_id]
            fh.write(json.dumps(obj) + "\n")


def inside_depth(point, region) -> float:
    """Signed distance to the region boundary; positive inside, negative out."""
    xmin, ymin, xmax, ymax = region
    x, y = float(point[0]), float(point[1])
    return min(x - xmin, xmax - x, y - ymin, ymax - y)


def filter_truncated(
    trajs: list[Trajectory], region, margin: float = 2.0
) -> list[Trajectory]:
    """Drop tracks that begin or end deep inside the observed region.

    Such tracks were cut off by the sensor footprint rather than actually
    entering or leaving, so their boundary states are meaningless.  A track
    is kept when both endpoints lie within `margin` of the region boundary.
    """
    xmin, ymin, xmax, ymax = region
    if not (xmax > xmin and ymax > ymin):
        raise InvalidRegion(f"degenerate region {region!r}")
    if margin < 0:
        raise InvalidRegion("margin must be non-negative")
    kept = []
    for tr in trajs:
        if inside_depth(tr.points[0], region) <= margin and inside_depth(tr.points[-1], region) <= margin:
            kept.append(tr)
    return kept


def hourly_counts(trajs: list[Trajectory], kind: AgentKind | None = None) -> np.ndarray:
    """Arrivals per hour-of-day bin, from each trajectory's start time."""
    counts = np.zeros(24)
    for tr in trajs:
        if kind is not None and tr.kind != kind:
            continue
        counts[int(tr.t0 / 3600.0) % 24] += 1
    return counts


def resample_corpus(trajs: list[Trajectory], dt: float) -> list[Trajectory]:
    out = []
    for tr in trajs:
        times = tr.t0 + np.arange(tr.n) * tr.dt
        raw = list(zip(times, tr.points))
        out.append(resample_uniform(raw, dt, agent_id=tr.agent_id, kind=tr.kind))
    return out


def corpus_features(trajs: list[Trajectory], k: int = WAYPOINT_COUNT):
    return [vectorize_trajectory(tr, k=k) for tr in trajs]


# ---------------------------------------------------------------------------
# synthetic four-way intersection

_ARMS = ("E", "N", "W", "S")


@dataclass
class SynthConfig:
    seed: int = 0
    n_ped: int = 200
    n_veh: int = 200
    n_anomalies: int = 0
    conflict_fraction: float = 0.25  # of vehicles, paired with a crossing pedestrian
    region_half: float = 20.0
    lane_offset: float = 2.0
    walk_offset: float = 8.0
    turn_inset: float = 6.0  # arclength from the center at which turns begin
    dt_raw: float = 1.0 / 30.0
    ped_speed: tuple = (1.4, 0.25, 0.8, 2.2)  # mean, sd, lo, hi (m/s)
    veh_speed: tuple = (8.0, 1.5, 4.0, 13.0)
    turn_speed_factor: float = 0.7
    yield_speed_factor: float = 0.25
    yield_range: float = 3.0  # meters; pedestrian ahead within this range triggers a yield
    lateral_sigma: float = 0.05
    lateral_smooth_s: float = 1.0
    ped_peaks: tuple = ((8.5, 1.2, 0.55), (17.5, 1.5, 0.45))  # (hour, sd, weight)
    veh_peaks: tuple = ((8.0, 1.0, 0.5), (17.0, 1.3, 0.5))


@dataclass
class SynthResult:
    trajectories: list[Trajectory]
    labels: dict[int, str]
    conflicts: list[tuple[int, int]]  # (ped_id, veh_id) pairs generated jointly
    config: SynthConfig

    @property
    def region(self) -> tuple:
        h = self.config.region_half
        return (-h, -h, h, h)


def _rot(k: int) -> np.ndarray:
    a = k * math.pi / 2.0
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def _arc(center, radius, a0, a1, n=24):
    angles = np.linspace(a0, a1, n)
    return np.stack([center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)], axis=1)


def _veh_routes(cfg: SynthConfig) -> dict[str, dict]:
    """Lane centerlines for 4 entries x {straight, right, left}.

    Canonical shapes assume entry from the east arm heading west in the
    right-hand lane; rotating by 90 degrees advances the entry arm E, N,
    W, S.  Each route records the arclength span of its turning arc so
    speeds can drop there.
    """
    h, lane, ins = cfg.region_half, cfg.lane_offset, cfg.turn_inset
    canon = {}
    canon["straight"] = (np.array([[h, lane], [-h, lane]]), 2)
    r_right = ins - lane
    arc = _arc((ins, ins), r_right, -math.pi / 2.0, -math.pi, n=24)
    pts = np.concatenate([[[h, lane]], arc, [[lane, h]]], axis=0)
    canon["right"] = (pts, 1)
    r_left = ins + lane
    arc = _arc((ins, -ins), r_left, math.pi / 2.0, math.pi, n=24)
    pts = np.concatenate([[[h, lane]], arc, [[-lane, -h]]], axis=0)
    canon["left"] = (pts, 3)

    routes = {}
    for k, src in enumerate(_ARMS):
        rot = _rot(k)
        for name, (pts, dst_step) in canon.items():
            dst = _ARMS[(dst_step + k) % 4]
            rpts = pts @ rot.T
            seg = np.linalg.norm(np.diff(rpts, axis=0), axis=1)
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            if name == "straight":
                span = None
            else:
                span = (cum[1], cum[-2])  # the arc occupies all interior vertices
            routes[f"veh:{src}->{dst}"] = {"pts": rpts, "arc_span": span}
    return routes


def _ped_routes(cfg: SynthConfig) -> dict[str, np.ndarray]:
    h, w = cfg.region_half, cfg.walk_offset
    routes = {}
    for side in (+1, -1):
        off = side * w
        sign = "+" if side > 0 else "-"
        routes[f"ped:EW@{sign}{w:g}:W"] = np.array([[h, off], [-h, off]])
        routes[f"ped:EW@{sign}{w:g}:E"] = np.array([[-h, off], [h, off]])
        routes[f"ped:NS@{sign}{w:g}:S"] = np.array([[off, h], [off, -h]])
        routes[f"ped:NS@{sign}{w:g}:N"] = np.array([[off, -h], [off, h]])
    return routes


class _Polyline:
    def __init__(self, pts: np.ndarray):
        self.pts = np.asarray(pts, dtype=float)
        seg = np.diff(self.pts, axis=0)
        self.seglen = np.linalg.norm(seg, axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(self.seglen)])
        self.length = float(self.cum[-1])

    def at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.seglen) - 1)
        frac = (s - self.cum[i]) / self.seglen[i]
        return (1.0 - frac) * self.pts[i] + frac * self.pts[i + 1]

    def tangent(self, s: float) -> np.ndarray:
        i = int(np.searchsorted(self.cum, min(max(s, 0.0), self.length), side="right")) - 1
        i = min(max(i, 0), len(self.seglen) - 1)
        v = self.pts[i + 1] - self.pts[i]
        return v / max(np.linalg.norm(v), 1e-12)


def _clipped_normal(rng, mean, sd, lo, hi) -> float:
    return float(np.clip(rng.normal(mean, sd), lo, hi))


def _draw_hour(rng, peaks) -> float:
    weights = np.array([p[2] for p in peaks], dtype=float)
    weights = weights / weights.sum()
    i = int(rng.choice(len(peaks), p=weights))
    return float(np.mod(rng.normal(peaks[i][0], peaks[i][1]), 24.0))


def _smooth_noise(rng, n: int, sigma: float, smooth_steps: float) -> np.ndarray:
    """Low-pass filtered unit-variance noise scaled to sigma."""
    white = rng.normal(0.0, 1.0, n)
    if n < 5 or smooth_steps < 1:
        return white * sigma
    half = min(int(3 * smooth_steps), (n - 1) // 2)
    kk = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (kk / smooth_steps) ** 2)
    kernel /= kernel.sum()
    smooth = np.convolve(white, kernel, mode="same")
    sd = smooth.std()
    if sd < 1e-12:
        return np.zeros(n)
    return smooth / sd * sigma


def _apply_lateral_noise(cfg, rng, pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    if n < 3 or cfg.lateral_sigma <= 0:
        return pts
    offsets = _smooth_noise(rng, n, cfg.lateral_sigma, cfg.lateral_smooth_s / cfg.dt_raw)
    tan = np.gradient(pts, axis=0)
    norms = np.linalg.norm(tan, axis=1, keepdims=True)
    tan = tan / np.maximum(norms, 1e-12)
    normal = np.stack([-tan[:, 1], tan[:, 0]], axis=1)
    return pts + offsets[:, None] * normal


def _walk_track(cfg, rng, line: _Polyline, speed: float) -> np.ndarray:
    step = speed * cfg.dt_raw
    n_steps = int(math.floor(line.length / step))
    s = np.arange(n_steps + 1) * step
    pts = np.stack([line.at(si) for si in s])
    return _apply_lateral_noise(cfg, rng, pts)


def _drive_track(cfg, rng, route: dict, speed: float) -> np.ndarray:
    line = _Polyline(route["pts"])
    span = route["arc_span"]
    pts = [line.at(0.0)]
    s = 0.0
    while s < line.length - 1e-9:
        v = speed
        if span is not None and span[0] <= s <= span[1]:
            v = speed * cfg.turn_speed_factor
        s = min(s + v * cfg.dt_raw, line.length)
        pts.append(line.at(s))
    return _apply_lateral_noise(cfg, rng, np.stack(pts))


def _conflict_tracks(cfg, rng, veh_route: dict, ped_line: _Polyline, v_veh: float, v_ped: float):
    """Jointly simulate a turning vehicle yielding to a crossing pedestrian.

    Returns (ped_pts, veh_pts, veh_start_offset_seconds); the vehicle track
    starts veh_delay seconds after the pedestrian track.
    """
    veh_line = _Polyline(veh_route["pts"])
    span = veh_route["arc_span"]
    # conflict point: closest approach of the two centerlines
    sv = np.linspace(0.0, veh_line.length, 300)
    sp = np.linspace(0.0, ped_line.length, 300)
    pv = np.stack([veh_line.at(x) for x in sv])
    pp = np.stack([ped_line.at(x) for x in sp])
    d2 = ((pv[:, None, :] - pp[None, :, :]) ** 2).sum(axis=2)
    iv, ip = np.unravel_index(int(np.argmin(d2)), d2.shape)
    s_conf_v, s_conf_p = float(sv[iv]), float(sp[ip])

    def veh_time_to(s_target: float) -> float:
        s, t = 0.0, 0.0
        while s < s_target:
            v = v_veh * (cfg.turn_speed_factor if span and span[0] <= s <= span[1] else 1.0)
            s += v * cfg.dt_raw
            t += cfg.dt_raw
        return t

    t_ped_conf = s_conf_p / v_ped
    # vehicle nominally arrives half a second after the pedestrian
    veh_delay = t_ped_conf + 0.5 - veh_time_to(s_conf_v)
    if veh_delay < 0:
        veh_delay = 0.0

    ped_pts, veh_pts = [], []
    s_p = s_v = 0.0
    t = 0.0
    tick = 0
    veh_started = False
    veh_start_tick = 0
    while s_p < ped_line.length - 1e-9 or s_v < veh_line.length - 1e-9:
        if s_p < ped_line.length - 1e-9:
            ped_pts.append(ped_line.at(s_p))
            s_p = min(s_p + v_ped * cfg.dt_raw, ped_line.length)
        if not veh_started and t >= veh_delay - 1e-9:
            veh_started = True
            veh_start_tick = tick
        if veh_started and s_v < veh_line.length - 1e-9:
            pos_v = veh_line.at(s_v)
            veh_pts.append(pos_v)
            v = v_veh * (cfg.turn_speed_factor if span and span[0] <= s_v <= span[1] else 1.0)
            if s_p < ped_line.length:
                pos_p = ped_line.at(s_p)
                gap = pos_p - pos_v
                dist = float(np.linalg.norm(gap))
                ahead = float(np.dot(gap, veh_line.tangent(s_v))) > 0.0
                if dist < cfg.yield_range and ahead:
                    v = v_veh * cfg.yield_speed_factor
            s_v = min(s_v + v * cfg.dt_raw, veh_line.length)
        t += cfg.dt_raw
        tick += 1
        if t > 600.0:
            break
    ped_pts.append(ped_line.at(ped_line.length))
    veh_pts.append(veh_line.at(veh_line.length))
    ped_arr = _apply_lateral_noise(cfg, rng, np.stack(ped_pts))
    veh_arr = _apply_lateral_noise(cfg, rng, np.stack(veh_pts))
    return ped_arr, veh_arr, veh_start_tick * cfg.dt_raw


def _anomaly_track(cfg, rng, which: int):
    """Tracks that do not belong to any normal route family."""
    h = cfg.region_half
    kind = which % 5
    if kind == 0:  # pedestrian cutting diagonally through the middle
        line = _Polyline(np.array([[h, 0.6 * h], [-h, -0.6 * h]]))
        pts = _walk_track(cfg, rng, line, 1.6)
        return AgentKind.PEDESTRIAN, pts, "anomaly:diagonal-ped"
    if kind == 1:  # vehicle driving the wrong lane
        route = {"pts": np.array([[h, -cfg.lane_offset], [-h, -cfg.lane_offset]]), "arc_span": None}
        pts = _drive_track(cfg, rng, route, 9.0)
        return AgentKind.VEHICLE, pts, "anomaly:wrong-lane"
    if kind == 2:  # running pedestrian
        line = _Polyline(np.array([[h, cfg.walk_offset], [-h, cfg.walk_offset]]))
        pts = _walk_track(cfg, rng, line, 3.6)
        return AgentKind.PEDESTRIAN, pts, "anomaly:running-ped"
    if kind == 3:  # vehicle stalling in the middle of the crossing
        line = _Polyline(np.array([[h, cfg.lane_offset], [-h, cfg.lane_offset]]))
        pts = [line.at(0.0)]
        s, t = 0.0, 0.0
        while s < line.length - 1e-9:
            v = 8.0
            if abs(s - line.length / 2.0) < 2.0 and t < 12.0:
                v = 0.05
            s = min(s + v * cfg.dt_raw, line.length)
            t += cfg.dt_raw
            pts.append(line.at(s))
        return AgentKind.VEHICLE, _apply_lateral_noise(cfg, rng, np.stack(pts)), "anomaly:stalled-veh"
    # weaving pedestrian: large slow zigzag across the walking line
    line = _Polyline(np.array([[-h, -cfg.walk_offset], [h, -cfg.walk_offset]]))
    base = _walk_track(cfg, rng, line, 1.3)
    phase = np.linspace(0.0, 6.0 * math.pi, base.shape[0])
    base[:, 1] += 2.0 * np.sin(phase)
    return AgentKind.PEDESTRIAN, base, "anomaly:weaving-ped"


def synth_generate(cfg: SynthConfig) -> SynthResult:
    """Deterministic synthetic corpus from the seed in the config."""
    rng = np.random.default_rng(cfg.seed)
    veh_routes = _veh_routes(cfg)
    ped_routes = {name: _Polyline(pts) for name, pts in _ped_routes(cfg).items()}
    veh_names = sorted(veh_routes)
    ped_names = sorted(ped_routes)
    turn_names = [n for n in veh_names if veh_routes[n]["arc_span"] is not None]

    trajs: list[Trajectory] = []
    labels: dict[int, str] = {}
    conflicts: list[tuple[int, int]] = []
    next_id = 0

    def add(kind, pts, t0, label):
        nonlocal next_id
        trajs.append(Trajectory(agent_id=next_id, kind=kind, t0=t0, dt=cfg.dt_raw, points=pts))
        labels[next_id] = label
        next_id += 1
        return next_id - 1

    for _ in range(cfg.n_ped):
        name = ped_names[int(rng.integers(len(ped_names)))]
        speed = _clipped_normal(rng, *cfg.ped_speed)
        t0 = _draw_hour(rng, cfg.ped_peaks) * 3600.0
        add(AgentKind.PEDESTRIAN, _walk_track(cfg, rng, ped_routes[name], speed), t0, name)

    n_conf = int(round(cfg.conflict_fraction * cfg.n_veh))
    maneuver_w = {2: 0.5, 1: 0.25, 3: 0.25}  # straight twice as common as either turn
    weights = np.array([maneuver_w[_dst_step(n)] for n in veh_names])
    weights = weights / weights.sum()
    for _ in range(cfg.n_veh - n_conf):
        name = veh_names[int(rng.choice(len(veh_names), p=weights))]
        speed = _clipped_normal(rng, *cfg.veh_speed)
        t0 = _draw_hour(rng, cfg.veh_peaks) * 3600.0
        add(AgentKind.VEHICLE, _drive_track(cfg, rng, veh_routes[name], speed), t0, name)

    for _ in range(n_conf):
        vname = turn_names[int(rng.integers(len(turn_names)))]
        pname = _crossed_walkline(vname, veh_routes, ped_routes)
        v_veh = _clipped_normal(rng, *cfg.veh_speed)
        v_ped = _clipped_normal(rng, *cfg.ped_speed)
        t_e = _draw_hour(rng, cfg.veh_peaks) * 3600.0
        ped_pts, veh_pts, veh_delay = _conflict_tracks(
            cfg, rng, veh_routes[vname], ped_routes[pname], v_veh, v_ped
        )
        pid = add(AgentKind.PEDESTRIAN, ped_pts, t_e, pname)
        vid = add(AgentKind.VEHICLE, veh_pts, t_e + veh_delay, vname)
        conflicts.append((pid, vid))

    for i in range(cfg.n_anomalies):
        kind, pts, label = _anomaly_track(cfg, rng, i)
        peaks = cfg.ped_peaks if kind == AgentKind.PEDESTRIAN else cfg.veh_peaks
        add(kind, pts, _draw_hour(rng, peaks) * 3600.0, label)

    return SynthResult(trajectories=trajs, labels=labels, conflicts=conflicts, config=cfg)


def _dst_step(name: str) -> int:
    src, dst = name.split(":")[1].split("->")
    return (_ARMS.index(dst) - _ARMS.index(src)) % 4


def _crossed_walkline(veh_name: str, veh_routes, ped_routes) -> str:
    """Pick the pedestrian route whose line passes closest to the vehicle route."""
    line = _Polyline(veh_routes[veh_name]["pts"])
    sv = np.linspace(0.0, line.length, 120)
    pv = np.stack([line.at(s) for s in sv])
    best, best_d = None, np.inf
    for pname in sorted(ped_routes):
        pl = ped_routes[pname]
        sp = np.linspace(0.0, pl.length, 120)
        pp = np.stack([pl.at(s) for s in sp])
        d = np.sqrt(((pv[:, None] - pp[None, :]) ** 2).sum(axis=2)).min()
        if d < best_d:
            best, best_d = pname, d
    return best


# ---------------------------------------------------------------------------
# scene extraction

def extract_scenes(
    trajs: list[Trajectory],
    dt: float = 0.4,
    length: int = 20,
    stride: int = 10,
    min_agents: int = 1,
    with_priors: bool = True,
    max_scenes: int | None = None,
) -> list[Scene]:
    """Cut fixed-length windows from the corpus and attach goal priors.

    Each agent's prior is the spline of its own full trajectory (its actual
    intent), so supervision targets are available for every source agent.
    """
    if not trajs:
        raise EmptyScene("empty corpus")
    res = resample_corpus(trajs, dt)
    priors = {}
    if with_priors:
        for tr in res:
            feat = vectorize_trajectory(tr)
            priors[tr.agent_id] = prior_from_feature(feat, dt=dt, kind=tr.kind)
    bases = [int(round(tr.t0 / dt)) for tr in res]
    f_lo = min(bases)
    f_hi = max(b + tr.n for b, tr in zip(bases, res))
    scenes = []
    for start in range(f_lo, f_hi - length + 1, stride):
        try:
            scene = slice_scene(res, start, length)
        except EmptyScene:
            continue
        if scene.n_agents < min_agents:
            continue
        if with_priors:
            scene.priors = [priors[aid] for aid in scene.ids]
        scenes.append(scene)
        if max_scenes is not None and len(scenes) >= max_scenes:
            break
    if not scenes:
        raise EmptyScene("no window satisfied the agent-count requirement")
    return scenes


def save_scenes(scenes: list[Scene], path) -> None:
    """Scene windows as JSONL; masked frames are stored as nulls."""
    with open(path, "w", encoding="utf-8") as fh:
        for sc in scenes:
            agents = []
            for i, aid in enumerate(sc.ids):
                pos = [
                    [float(x), float(y)] if sc.mask[i, f] else None
                    for f, (x, y) in enumerate(sc.positions[i])
                ]
                entry = {
                    "id": aid,
                    "kind": sc.kinds[i].value,
                    "entry_offset": int(sc.entry_offset[i]),
                    "positions": pos,
                }
                if sc.priors is not None:
                    entry["prior_feature"] = [float(v) for v in sc.priors[i].source_feature.flatten()]
                agents.append(entry)
            fh.write(
                json.dumps(
                    {
                        "schema": 1,
                        "start_index": sc.start_index,
                        "length": sc.length,
                        "dt": sc.dt,
                        "agents": agents,
                    }
                )
                + "\n"
            )


def load_scenes(path) -> list[Scene]:
    from .core import TrajectoryFeature

    scenes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                length = int(obj["length"])
                dt = float(obj["dt"])
                ids, kinds, rows, masks, offsets, priors = [], [], [], [], [], []
                has_priors = False
                for a in obj["agents"]:
                    ids.append(int(a["id"]))
                    kinds.append(AgentKind.from_str(a["kind"]))
                    offsets.append(int(a["entry_offset"]))
                    row = np.full((length, 2), np.nan)
                    mask = np.zeros(length, dtype=bool)
                    for f, p in enumerate(a["positions"]):
                        if p is not None:
                            row[f] = p
                            mask[f] = True
                    rows.append(row)
                    masks.append(mask)
                    if "prior_feature" in a:
                        has_priors = True
                        feat = TrajectoryFeature.from_flat(np.asarray(a["prior_feature"]))
                        priors.append(prior_from_feature(feat, dt=dt, kind=kinds[-1]))
                    else:
                        priors.append(None)
                scene = Scene(
                    start_index=int(obj["start_index"]),
                    length=length,
                    dt=dt,
                    ids=ids,
                    kinds=kinds,
                    positions=np.stack(rows),
                    mask=np.stack(masks),
                    entry_offset=np.asarray(offsets, dtype=int),
                    priors=priors if has_priors else None,
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(lineno, str(exc)) from exc
            scenes.append(scene)
    return scenes
