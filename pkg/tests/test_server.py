"""WebSocket server: handshake, snapshots, command routing, backpressure."""
from __future__ import annotations

import pytest

pytest.importorskip("fastapi")

from fastapi.testclient import TestClient

from intersim.core import AgentKind
from intersim.density import TodDensityModel
from intersim.engine import SetSpeed, SimConfig, SimEngine, Spawn
from intersim.errors import IntersimError
from intersim.server import (
    METRICS_EVERY,
    QUEUE_LIMIT,
    _Connection,
    _palette,
    _round_mm,
    create_app,
    parse_command,
)

from conftest import line_feature, point_gmm

PED = AgentKind.PEDESTRIAN
VEH = AgentKind.VEHICLE


def build_engine(level_ped=0.0, level_veh=0.0, seed=0):
    gmms = {
        PED: point_gmm(PED, [line_feature([0.0, -8.0], [0.0, 8.0], 12.0)]),
        VEH: point_gmm(VEH, [line_feature([-20.0, 0.0], [20.0, 0.0], 5.0)]),
    }
    tod = {
        PED: TodDensityModel.constant(PED, level_ped),
        VEH: TodDensityModel.constant(VEH, level_veh),
    }
    return SimEngine(SimConfig(seed=seed), gmms, tod)


@pytest.fixture
def client():
    app = create_app(build_engine())
    with TestClient(app) as c:
        yield c


@pytest.fixture
def busy_client():
    app = create_app(build_engine(level_ped=2.0, level_veh=1.0))
    with TestClient(app) as c:
        yield c


# ----------------------------------------------------------------- unit bits


def test_round_mm():
    assert _round_mm(1.23456) == 1.235
    assert _round_mm(-0.0004) == -0.0


def test_palette_unique_hex():
    pal = _palette(12)
    assert len(pal) == 12 and len(set(pal)) == 12
    assert all(p.startswith("#") and len(p) == 7 for p in pal)


def test_parse_command_payloads():
    assert parse_command({"type": "pause"}).__class__.__name__ == "Pause"
    cmd = parse_command({"type": "spawn", "kind": "veh", "count": 3, "components": [5]})
    assert cmd == Spawn(kind=VEH, count=3, components=[5])
    assert parse_command({"type": "set_speed", "factor": 2}) == SetSpeed(factor=2.0)
    with pytest.raises(IntersimError):
        parse_command({"type": "warp"})


def test_connection_queue_drops_oldest():
    conn = _Connection()
    for i in range(QUEUE_LIMIT + 5):
        conn.push({"seq": i})
    assert conn.queue.qsize() == QUEUE_LIMIT
    assert conn.queue.get_nowait() == {"seq": 5}


# ------------------------------------------------------------------ http api


def test_health_and_manual_step(client):
    assert client.get("/health").json() == {"status": "ok", "tick": 0}
    assert client.post("/step").json() == {"step": 0, "tick": 1}
    assert client.get("/health").json()["tick"] == 1


# ----------------------------------------------------------------- websocket


def test_hello_handshake(client):
    with client.websocket_connect("/ws") as ws:
        hello = ws.receive_json()
        assert hello["type"] == "hello"
        assert hello["schema"] == 1
        assert hello["config"]["dt"] == 0.4
        assert hello["config"]["l_ob"] == 8
        assert hello["config"]["l_pd"] == 12
        assert hello["config"]["refine"] is False  # no forecast model attached
        for kind in ("ped", "veh"):
            block = hello["kinds"][kind]
            assert block["n_components"] == 1
            assert len(block["palette"]) == 1
            assert len(block["components"][0]["waypoints"]) == 20
        snap = ws.receive_json()
        assert snap["type"] == "snapshot"
        assert snap["agents"] == [] and snap["step"] == 0


def test_spawn_round_trip_with_prior_on_first_sight(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()  # hello
        ws.receive_json()  # initial snapshot
        ws.send_json({"type": "spawn", "kind": "ped"})
        queued = ws.receive_json()
        assert queued["type"] == "queued"
        cid = queued["command_id"]

        client.post("/step")
        snap = ws.receive_json()
        assert snap["type"] == "snapshot"
        assert len(snap["agents"]) == 1
        agent = snap["agents"][0]
        # first sighting carries the prior polyline; afterwards it is omitted
        # (sampling noise on T puts the grid at 31 or 32 points)
        assert "prior" in agent and len(agent["prior"]) in (31, 32)
        assert agent["duration_s"] == pytest.approx(12.0, abs=0.01)
        ack = ws.receive_json()
        assert ack == {
            "type": "ack",
            "command_id": cid,
            "applied_tick": 0,
            "applied_step": 0,
            "info": ack["info"],
        }
        assert ack["info"]["type"] == "spawn"

        client.post("/step")
        snap2 = ws.receive_json()
        assert "prior" not in snap2["agents"][0]
        assert 1 <= len(snap2["agents"][0]["tail"]) <= 8


def test_positions_are_millimeter_rounded(busy_client):
    with busy_client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.receive_json()
        busy_client.post("/step")
        snap = ws.receive_json()
        assert snap["agents"]
        for agent in snap["agents"]:
            for v in (agent["x"], agent["y"]):
                assert v == _round_mm(v)
            for px, py in agent["tail"]:
                assert px == _round_mm(px) and py == _round_mm(py)


def test_error_replies(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.receive_json()
        ws.send_text("{not json")
        err = ws.receive_json()
        assert err["type"] == "error" and "bad json" in err["detail"]
        ws.send_json({"type": "warp"})
        assert ws.receive_json()["type"] == "error"
        ws.send_json({"type": "spawn", "kind": "ped", "components": [99]})
        err3 = ws.receive_json()
        assert err3["type"] == "error" and "component" in err3["detail"]
        # the engine was never disturbed
        assert client.get("/health").json()["tick"] == 0


def test_snapshot_on_demand(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.receive_json()
        ws.send_json({"type": "snapshot"})
        snap = ws.receive_json()
        assert snap["type"] == "snapshot" and snap["tick"] == 0


def test_acks_route_to_issuing_connection(client):
    with client.websocket_connect("/ws") as a, client.websocket_connect("/ws") as b:
        for ws in (a, b):
            ws.receive_json()
            ws.receive_json()
        a.send_json({"type": "spawn", "kind": "veh", "count": 2})
        assert a.receive_json()["type"] == "queued"
        client.post("/step")
        assert a.receive_json()["type"] == "snapshot"
        assert a.receive_json()["type"] == "ack"
        # the other connection sees the world change but not the ack
        snap_b = b.receive_json()
        assert snap_b["type"] == "snapshot" and len(snap_b["agents"]) == 2
        client.post("/step")
        assert b.receive_json()["type"] == "snapshot"


def test_metrics_message_cadence(busy_client):
    with busy_client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.receive_json()
        got_metrics = None
        for step in range(METRICS_EVERY + 1):
            busy_client.post("/step")
        for _ in range(METRICS_EVERY + 2):
            msg = ws.receive_json()
            if msg["type"] == "metrics":
                got_metrics = msg
                break
        assert got_metrics is not None
        assert got_metrics["active"]["ped"] >= 1
        assert got_metrics["min_separation"] is None or got_metrics["min_separation"] > 0
