"""Interactive intersection simulation.

The engine advances a tick clock at a fixed model rate.  Agents spawn from
the mixture priors at a rate set by the time-of-day profiles, follow
buffered positions tick by tick, and leave when they reach their prior's
destination (or overstay their expected duration).  Every prediction
window the buffers are rebuilt, either from the refinement model rolled
out over all active agents jointly or, with refinement disabled, from the
priors themselves.

Commands are queued from any thread and drained at the next tick
boundary; each applied command produces an acknowledgement carrying the
tick at which it took effect, so a recorded session can be replayed
headlessly into an identical trace.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from .core import AgentKind, TrajectoryFeature
from .density import TodDensityModel
from .errors import ConfigMismatch, InvalidInput, InvalidSpeed, PriorRejection
from .forecaster import ForecastModel, rollout
from .gmm import GmmModel, validate_component_set
from .spline import PriorTrajectory, prior_from_feature

SPEED_CAPS = {AgentKind.PEDESTRIAN: 4.0, AgentKind.VEHICLE: 30.0}


@dataclass
class SimConfig:
    dt: float = 0.4
    l_ob: int = 8
    l_pd: int = 12
    exit_eps: float = 1.0  # meters to the destination that counts as arrival
    age_margin: float = 1.5  # forced removal at age_margin * prior duration
    start_hour: float = 8.0
    seed: int = 0
    refine: bool = True
    max_prior_attempts: int = 20


# --- commands -------------------------------------------------------------

@dataclass
class Pause:
    pass


@dataclass
class Resume:
    pass


@dataclass
class SetSpeed:
    factor: float


@dataclass
class Spawn:
    kind: AgentKind
    count: int = 1
    components: list | None = None


@dataclass
class InjectScenario:
    """Stage a pedestrian and a vehicle so their priors meet."""

    components_ped: list | None = None
    components_veh: list | None = None


@dataclass
class SetConditionSet:
    kind: AgentKind
    components: list | None  # None restores the full mixture


COMMAND_TYPES = (Pause, Resume, SetSpeed, Spawn, InjectScenario, SetConditionSet)


@dataclass
class ActiveAgent:
    agent_id: int
    kind: AgentKind
    prior: PriorTrajectory
    component: int | None
    spawn_tick: int
    history: list = field(default_factory=list)  # actual positions, one per tick
    buffer: list = field(default_factory=list)  # upcoming positions to consume
    cursor: int = 0

    @property
    def position(self) -> np.ndarray:
        return self.history[-1]

    def age_ticks(self, tick: int) -> int:
        return tick - self.spawn_tick

    def local_time(self, tick: int, dt: float) -> float:
        return self.age_ticks(tick) * dt


class SimEngine:
    def __init__(
        self,
        config: SimConfig,
        priors: dict[AgentKind, GmmModel],
        tod: dict[AgentKind, TodDensityModel],
        model: ForecastModel | None = None,
    ):
        if model is not None:
            if (model.l_ob, model.l_pd) != (config.l_ob, config.l_pd) or abs(model.dt - config.dt) > 1e-9:
                raise ConfigMismatch(
                    f"model windows (l_ob={model.l_ob}, l_pd={model.l_pd}, dt={model.dt}) "
                    f"do not match the simulation config"
                )
        self.config = config
        self.priors = priors
        self.tod = tod
        self.model = model
        self.rng = np.random.default_rng(config.seed)
        self.tick = 0
        self.step_index = 0
        self.paused = False
        self.speed = 1.0
        self.agents: list[ActiveAgent] = []
        self.condition_sets: dict[AgentKind, list | None] = {k: None for k in priors}
        self._staged: list[tuple[int, AgentKind, PriorTrajectory, int | None]] = []
        self._queue: list[tuple[int, object]] = []
        self._next_agent_id = 0
        self._next_command_id = 0
        self.acks: list[dict] = []
        self._lock = threading.Lock()

    # --- public API -------------------------------------------------------

    def submit(self, cmd) -> int:
        """Queue a command for the next tick boundary.

        Validation happens here, at the call site, so a malformed command
        can never break the tick loop later.
        """
        if not isinstance(cmd, COMMAND_TYPES):
            raise InvalidInput(f"unknown command {cmd!r}")
        self._validate(cmd)
        with self._lock:
            cid = self._next_command_id
            self._next_command_id += 1
            self._queue.append((cid, cmd))
        return cid

    def _validate(self, cmd) -> None:
        if isinstance(cmd, SetSpeed) and not cmd.factor > 0:
            raise InvalidSpeed(f"speed factor must be positive, got {cmd.factor}")
        if isinstance(cmd, Spawn):
            if cmd.count < 1:
                raise InvalidInput("spawn count must be at least 1")
            if cmd.components is not None:
                validate_component_set(cmd.components, self.priors[cmd.kind].m)
        if isinstance(cmd, SetConditionSet) and cmd.components is not None:
            validate_component_set(cmd.components, self.priors[cmd.kind].m)
        if isinstance(cmd, InjectScenario):
            if cmd.components_ped is not None:
                validate_component_set(cmd.components_ped, self.priors[AgentKind.PEDESTRIAN].m)
            if cmd.components_veh is not None:
                validate_component_set(cmd.components_veh, self.priors[AgentKind.VEHICLE].m)

    def hour(self) -> float:
        return (self.config.start_hour + self.tick * self.config.dt / 3600.0) % 24.0

    def snapshot(self) -> dict:
        with self._lock:
            return self._snapshot_locked()

    def _snapshot_locked(self) -> dict:
        return {
            "step": self.step_index,
            "tick": self.tick,
            "hour": self.hour(),
            "paused": self.paused,
            "speed": self.speed,
            "condition_sets": {
                k.value: (None if v is None else [int(c) for c in v])
                for k, v in self.condition_sets.items()
            },
            "agents": [
                {
                    "id": ag.agent_id,
                    "kind": ag.kind.value,
                    "x": float(ag.position[0]),
                    "y": float(ag.position[1]),
                    "component": ag.component,
                    "age_ticks": ag.age_ticks(self.tick),
                }
                for ag in self.agents
            ],
        }

    def step(self) -> dict:
        """Advance one tick (or record a paused beat) and return the record."""
        with self._lock:
            self._drain_commands()
            if self.paused:
                record = self._snapshot_locked()
                record["events"] = {"spawn": [], "exit": []}
                self.step_index += 1
                return record
            self.tick += 1
            spawned = self._spawn_phase()
            post_spawn = {
                k.value: sum(1 for ag in self.agents if ag.kind == k) for k in self.tod
            }
            self._move_phase()
            if self.tick % self.config.l_pd == 0:
                self._refine_phase()
            exited = self._exit_phase()
            record = self._snapshot_locked()
            record["events"] = {"spawn": spawned, "exit": exited}
            record["desired"] = {
                k.value: int(self.tod[k].expected_count(self.hour())) for k in self.tod
            }
            record["post_spawn_counts"] = post_spawn
            self.step_index += 1
            return record

    def run(self, n_steps: int, script: dict[int, list] | None = None, trace_path=None) -> list[dict]:
        """Headless loop; script maps step index to commands submitted there."""
        records = []
        sink = open(trace_path, "w", encoding="utf-8") if trace_path else None
        try:
            for i in range(n_steps):
                if script and i in script:
                    for cmd in script[i]:
                        self.submit(cmd)
                rec = self.step()
                records.append(rec)
                if sink:
                    sink.write(json.dumps(rec) + "\n")
        finally:
            if sink:
                sink.close()
        return records

    # --- internals --------------------------------------------------------

    def _drain_commands(self) -> None:
        queue, self._queue = self._queue, []
        for cid, cmd in queue:
            try:
                info = self._apply(cmd)
            except PriorRejection as exc:
                # a sampling failure is a runtime condition, not a caller
                # error; report it in the ack and keep the clock running
                info = {"type": "error", "detail": str(exc)}
            self.acks.append(
                {
                    "command_id": cid,
                    "applied_tick": self.tick,
                    "applied_step": self.step_index,
                    "info": info,
                }
            )

    def _apply(self, cmd) -> dict:
        if isinstance(cmd, Pause):
            self.paused = True
            return {"type": "pause"}
        if isinstance(cmd, Resume):
            self.paused = False
            return {"type": "resume"}
        if isinstance(cmd, SetSpeed):
            if not cmd.factor > 0:
                raise InvalidSpeed(f"speed factor must be positive, got {cmd.factor}")
            self.speed = float(cmd.factor)
            return {"type": "set_speed", "factor": self.speed}
        if isinstance(cmd, SetConditionSet):
            if cmd.components is not None:
                validate_component_set(cmd.components, self.priors[cmd.kind].m)
            self.condition_sets[cmd.kind] = (
                None if cmd.components is None else [int(c) for c in cmd.components]
            )
            return {"type": "set_condition_set", "kind": cmd.kind.value}
        if isinstance(cmd, Spawn):
            if cmd.count < 1:
                raise InvalidInput("spawn count must be at least 1")
            if cmd.components is not None:
                validate_component_set(cmd.components, self.priors[cmd.kind].m)
            for _ in range(cmd.count):
                prior, comp = self.sample_prior(cmd.kind, components=cmd.components)
                self._staged.append((self.tick + 1, cmd.kind, prior, comp))
            return {"type": "spawn", "kind": cmd.kind.value, "count": cmd.count,
                    "spawn_tick": self.tick + 1}
        if isinstance(cmd, InjectScenario):
            return self._stage_scenario(cmd)
        raise InvalidInput(f"unknown command {cmd!r}")

    def _stage_scenario(self, cmd: InjectScenario) -> dict:
        """Sample one prior per kind and time their spawns to meet.

        The meeting point is the global minimum of pairwise distance over
        the two prior grids; spawn ticks are offset so both agents reach
        their closest-approach sample on the same tick.
        """
        prior_p, comp_p = self.sample_prior(AgentKind.PEDESTRIAN, components=cmd.components_ped)
        prior_v, comp_v = self.sample_prior(AgentKind.VEHICLE, components=cmd.components_veh)
        pp, pv = prior_p.points, prior_v.points
        d2 = ((pp[:, None, :] - pv[None, :, :]) ** 2).sum(axis=2)
        i_star, j_star = np.unravel_index(int(np.argmin(d2)), d2.shape)
        meet_tick = self.tick + 1 + int(max(i_star, j_star))
        tick_p = meet_tick - int(i_star)
        tick_v = meet_tick - int(j_star)
        self._staged.append((tick_p, AgentKind.PEDESTRIAN, prior_p, comp_p))
        self._staged.append((tick_v, AgentKind.VEHICLE, prior_v, comp_v))
        return {
            "type": "inject_scenario",
            "meet_tick": meet_tick,
            "ped_spawn_tick": tick_p,
            "veh_spawn_tick": tick_v,
            "closest_distance": float(np.sqrt(d2[i_star, j_star])),
        }

    def sample_prior(self, kind: AgentKind, components=None) -> tuple[PriorTrajectory, int]:
        """Rejection-sample one plausible agent prior from the mixture."""
        cfg = self.config
        gmm = self.priors[kind]
        cset = components if components is not None else self.condition_sets.get(kind)
        if cset is None:
            cset = list(range(gmm.m))
        reasons: dict[str, int] = {}
        for _ in range(cfg.max_prior_attempts):
            vec, comp = gmm.sample_conditional(cset, 1, self.rng)
            try:
                feat = TrajectoryFeature.from_flat(vec[0])
            except InvalidInput:
                reasons["invalid-feature"] = reasons.get("invalid-feature", 0) + 1
                continue
            if feat.duration_T <= 2.0 * cfg.dt:
                reasons["short-duration"] = reasons.get("short-duration", 0) + 1
                continue
            prior = prior_from_feature(feat, dt=cfg.dt, kind=kind, component=int(comp[0]))
            if prior.max_speed() > SPEED_CAPS[kind]:
                reasons["speed-cap"] = reasons.get("speed-cap", 0) + 1
                continue
            return prior, int(comp[0])
        raise PriorRejection(kind.value, cfg.max_prior_attempts, reasons)

    def _prior_buffer(self, agent: ActiveAgent, n: int) -> list:
        t0 = agent.local_time(self.tick, self.config.dt)
        return [
            agent.prior.position_at(t0 + (j + 1) * self.config.dt) for j in range(n)
        ]

    def _spawn_one(self, kind: AgentKind, prior: PriorTrajectory, comp: int | None) -> int:
        agent = ActiveAgent(
            agent_id=self._next_agent_id,
            kind=kind,
            prior=prior,
            component=comp,
            spawn_tick=self.tick,
        )
        self._next_agent_id += 1
        agent.history.append(prior.points[0].copy())
        agent.buffer = self._prior_buffer(agent, 2 * self.config.l_pd)
        agent.cursor = 0
        self.agents.append(agent)
        return agent.agent_id

    def _spawn_phase(self) -> list[int]:
        spawned = []
        # staged spawns (commands and scenarios) fire at their tick
        due = [s for s in self._staged if s[0] <= self.tick]
        self._staged = [s for s in self._staged if s[0] > self.tick]
        for _, kind, prior, comp in due:
            spawned.append(self._spawn_one(kind, prior, comp))
        # top up to the time-of-day profile
        hour = self.hour()
        for kind, tod in self.tod.items():
            desired = tod.expected_count(hour)
            active = sum(1 for ag in self.agents if ag.kind == kind)
            for _ in range(max(0, desired - active)):
                try:
                    prior, comp = self.sample_prior(kind)
                except PriorRejection:
                    break
                spawned.append(self._spawn_one(kind, prior, comp))
        return spawned

    def _move_phase(self) -> None:
        for agent in self.agents:
            if agent.spawn_tick == self.tick:
                continue  # spawned this tick, already at its entry point
            if agent.cursor >= len(agent.buffer):
                agent.buffer = self._prior_buffer(agent, 2 * self.config.l_pd)
                agent.cursor = 0
            agent.history.append(np.asarray(agent.buffer[agent.cursor], dtype=float))
            agent.cursor += 1

    def _refine_phase(self) -> None:
        cfg = self.config
        if not self.agents:
            return
        if self.model is None or not cfg.refine:
            for agent in self.agents:
                agent.buffer = self._prior_buffer(agent, 2 * cfg.l_pd)
                agent.cursor = 0
            return
        histories = [np.stack(ag.history) for ag in self.agents]
        kinds = [ag.kind for ag in self.agents]
        priors = [ag.prior for ag in self.agents]
        t_last = np.array([ag.local_time(self.tick, cfg.dt) for ag in self.agents])
        preds = rollout(self.model, histories, kinds, priors, t_last, cfg.l_pd)
        for i, agent in enumerate(self.agents):
            agent.buffer = [preds[i, j].copy() for j in range(cfg.l_pd)]
            agent.cursor = 0

    def _exit_phase(self) -> list[list]:
        cfg = self.config
        exited = []
        keep = []
        for agent in self.agents:
            dist = float(np.linalg.norm(agent.position - agent.prior.destination))
            age_s = agent.age_ticks(self.tick) * cfg.dt
            if dist < cfg.exit_eps and agent.age_ticks(self.tick) > 0:
                exited.append([agent.agent_id, "reached"])
            elif age_s > cfg.age_margin * agent.prior.duration_T:
                exited.append([agent.agent_id, "timeout"])
            else:
                keep.append(agent)
        self.agents = keep
        return exited


def read_trace(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
