"""WebSocket control server around the simulation engine.

One engine instance is shared by all connections.  Commands arrive as
JSON over the socket, are queued into the engine, and are acknowledged
with the tick at which they took effect.  Every engine step produces a
snapshot broadcast to all connections; positions are rounded to the
millimeter to keep payloads small, and each agent's prior polyline is
sent only the first time that connection sees the agent.

The engine can be paced by a background task (live mode) or advanced
explicitly through POST /step (tests, debugging).
"""

from __future__ import annotations

import asyncio
import colorsys
import json
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .core import AgentKind, TrajectoryFeature
from .density import TodDensityModel
from .engine import (
    InjectScenario,
    Pause,
    Resume,
    SetConditionSet,
    SetSpeed,
    SimConfig,
    SimEngine,
    Spawn,
)
from .errors import IntersimError
from .forecaster import ForecastModel
from .gmm import GmmModel
from .metrics import min_separation_trace

SCHEMA_VERSION = 1
QUEUE_LIMIT = 64
METRICS_EVERY = 25  # steps between metrics messages


def _round_mm(x: float) -> float:
    return round(float(x) * 1000.0) / 1000.0


def _palette(n: int) -> list[str]:
    colors = []
    for i in range(n):
        r, g, b = colorsys.hsv_to_rgb((i / max(n, 1)) % 1.0, 0.65, 0.95)
        colors.append(f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}")
    return colors


def _component_summaries(gmm: GmmModel) -> list[dict]:
    """Mean way-point polyline per component, for legend thumbnails."""
    out = []
    for j in range(gmm.m):
        vec = gmm.standardizer.inverse(gmm.means[j : j + 1])[0]
        feat = TrajectoryFeature.from_flat(vec)
        out.append(
            {
                "index": j,
                "weight": float(gmm.weights[j]),
                "waypoints": [[_round_mm(x), _round_mm(y)] for x, y in feat.waypoints],
            }
        )
    return out


def parse_command(obj: dict):
    ctype = obj.get("type")
    if ctype == "pause":
        return Pause()
    if ctype == "resume":
        return Resume()
    if ctype == "set_speed":
        return SetSpeed(factor=float(obj["factor"]))
    if ctype == "spawn":
        return Spawn(
            kind=AgentKind.from_str(obj["kind"]),
            count=int(obj.get("count", 1)),
            components=obj.get("components"),
        )
    if ctype == "inject_scenario":
        return InjectScenario(
            components_ped=obj.get("components_ped"),
            components_veh=obj.get("components_veh"),
        )
    if ctype == "set_condition_set":
        return SetConditionSet(
            kind=AgentKind.from_str(obj["kind"]), components=obj.get("components")
        )
    raise IntersimError(f"unknown command type {ctype!r}")


class _Connection:
    def __init__(self):
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_LIMIT)
        self.seen_agents: set[int] = set()
        self.pending_commands: set[int] = set()

    def push(self, msg: dict) -> None:
        # bounded queue, oldest snapshot dropped first under backpressure
        while True:
            try:
                self.queue.put_nowait(msg)
                return
            except asyncio.QueueFull:
                try:
                    self.queue.get_nowait()
                except asyncio.QueueEmpty:
                    return


class ServerState:
    def __init__(self, engine: SimEngine):
        self.engine = engine
        self.connections: list[_Connection] = []
        self.ack_cursor = 0
        self.recent_records: list[dict] = []

    def snapshot_message(self, conn: _Connection, record: dict | None = None) -> dict:
        rec = record if record is not None else self.engine.snapshot()
        agents = []
        for ag_rec, agent in zip(rec["agents"], self.engine.agents):
            entry = {
                "id": ag_rec["id"],
                "kind": ag_rec["kind"],
                "x": _round_mm(ag_rec["x"]),
                "y": _round_mm(ag_rec["y"]),
                "component": ag_rec["component"],
                "tail": [
                    [_round_mm(p[0]), _round_mm(p[1])]
                    for p in agent.history[-self.engine.config.l_ob :]
                ],
            }
            if ag_rec["id"] not in conn.seen_agents:
                conn.seen_agents.add(ag_rec["id"])
                entry["prior"] = [
                    [_round_mm(p[0]), _round_mm(p[1])] for p in agent.prior.points
                ]
                entry["duration_s"] = round(float(agent.prior.duration_T), 3)
            agents.append(entry)
        return {
            "type": "snapshot",
            "step": rec["step"],
            "tick": rec["tick"],
            "hour": round(rec["hour"], 5),
            "paused": rec["paused"],
            "speed": rec["speed"],
            "agents": agents,
            "events": rec.get("events", {"spawn": [], "exit": []}),
        }

    def advance(self) -> dict:
        """One engine step plus fan-out of snapshots, acks and metrics."""
        record = self.engine.step()
        self.recent_records.append(record)
        if len(self.recent_records) > METRICS_EVERY:
            self.recent_records.pop(0)
        acks = self.engine.acks[self.ack_cursor :]
        self.ack_cursor = len(self.engine.acks)
        for conn in self.connections:
            # agents list in the record mirrors engine.agents ordering
            conn.push(self.snapshot_message(conn, record))
            for ack in acks:
                if ack["command_id"] in conn.pending_commands:
                    conn.pending_commands.discard(ack["command_id"])
                    conn.push(
                        {
                            "type": "ack",
                            "command_id": ack["command_id"],
                            "applied_tick": ack["applied_tick"],
                            "applied_step": ack["applied_step"],
                            "info": ack["info"],
                        }
                    )
            if record["step"] > 0 and record["step"] % METRICS_EVERY == 0:
                conn.push(self._metrics_message(record))
        return record

    def _metrics_message(self, record: dict) -> dict:
        counts = {"ped": 0, "veh": 0}
        for ag in record["agents"]:
            counts[ag["kind"]] += 1
        try:
            sep = min_separation_trace(self.recent_records)
        except IntersimError:
            sep = None
        return {
            "type": "metrics",
            "tick": record["tick"],
            "active": counts,
            "min_separation": None if sep is None else round(sep, 3),
        }

    def hello_message(self, conn: _Connection) -> dict:
        eng = self.engine
        cfg = eng.config
        return {
            "type": "hello",
            "schema": SCHEMA_VERSION,
            "config": {
                "dt": cfg.dt,
                "l_ob": cfg.l_ob,
                "l_pd": cfg.l_pd,
                "exit_eps": cfg.exit_eps,
                "start_hour": cfg.start_hour,
                "refine": cfg.refine and eng.model is not None,
            },
            "kinds": {
                kind.value: {
                    "n_components": eng.priors[kind].m,
                    "palette": _palette(eng.priors[kind].m),
                    "components": _component_summaries(eng.priors[kind]),
                }
                for kind in eng.priors
            },
            "tick": eng.tick,
        }


def create_app(engine: SimEngine, static_dir=None, paced: bool = False) -> FastAPI:
    app = FastAPI()
    state = ServerState(engine)
    app.state.sim = state

    @app.get("/health")
    async def health():
        return {"status": "ok", "tick": engine.tick}

    @app.post("/step")
    async def step():
        record = state.advance()
        return {"step": record["step"], "tick": record["tick"]}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        conn = _Connection()
        state.connections.append(conn)
        await ws.send_text(json.dumps(state.hello_message(conn)))
        await ws.send_text(json.dumps(state.snapshot_message(conn)))

        async def sender():
            while True:
                msg = await conn.queue.get()
                await ws.send_text(json.dumps(msg))

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    conn.push({"type": "error", "detail": f"bad json: {exc}"})
                    continue
                if obj.get("type") == "snapshot":
                    conn.push(state.snapshot_message(conn))
                    continue
                try:
                    cmd = parse_command(obj)
                    cid = engine.submit(cmd)
                except IntersimError as exc:
                    conn.push({"type": "error", "detail": str(exc)})
                    continue
                conn.pending_commands.add(cid)
                conn.push({"type": "queued", "command_id": cid})
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            state.connections.remove(conn)

    if paced:

        async def pace_loop():
            while True:
                await asyncio.sleep(engine.config.dt / max(engine.speed, 1e-6))
                state.advance()

        @app.on_event("startup")
        async def start_pacer():
            app.state.pacer = asyncio.create_task(pace_loop())

        @app.on_event("shutdown")
        async def stop_pacer():
            app.state.pacer.cancel()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="frontend")

    return app


def build_default_app(
    gmm_ped: str,
    gmm_veh: str,
    tod_ped: str | None = None,
    tod_veh: str | None = None,
    model: str | None = None,
    seed: int = 0,
    level: float = 3.0,
    start_hour: float = 8.0,
    static_dir: str | None = None,
) -> FastAPI:
    def _read(path):
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    priors = {
        AgentKind.PEDESTRIAN: GmmModel.from_dict(_read(gmm_ped)),
        AgentKind.VEHICLE: GmmModel.from_dict(_read(gmm_veh)),
    }
    tod = {
        AgentKind.PEDESTRIAN: (
            TodDensityModel.from_dict(_read(tod_ped))
            if tod_ped
            else TodDensityModel.constant(AgentKind.PEDESTRIAN, level)
        ),
        AgentKind.VEHICLE: (
            TodDensityModel.from_dict(_read(tod_veh))
            if tod_veh
            else TodDensityModel.constant(AgentKind.VEHICLE, level)
        ),
    }
    fmodel = ForecastModel.from_dict(_read(model)) if model else None
    config = SimConfig(seed=seed, start_hour=start_hour)
    engine = SimEngine(config, priors, tod, model=fmodel)
    return create_app(engine, static_dir=static_dir, paced=True)
