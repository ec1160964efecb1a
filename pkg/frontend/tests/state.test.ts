import { beforeEach, describe, expect, it } from "vitest";

import type { HelloMsg, SnapshotMsg } from "../src/protocol";
import { spawn } from "../src/protocol";
import {
  activeCounts,
  agentColor,
  applyMessage,
  createSceneState,
  formatClock,
  noteSent,
  resetConnection,
  type SceneState,
} from "../src/state";

const hello: HelloMsg = {
  type: "hello",
  schema: 1,
  config: { dt: 0.4, l_ob: 8, l_pd: 12, exit_eps: 1, start_hour: 8, refine: true },
  kinds: {
    veh: {
      n_components: 2,
      palette: ["#111111", "#222222"],
      components: [
        { index: 0, weight: 0.5, waypoints: [[0, 0], [1, 1]] },
        { index: 1, weight: 0.5, waypoints: [[0, 0], [-1, 1]] },
      ],
    },
  },
  tick: 5,
};

function snap(partial: Partial<SnapshotMsg>): SnapshotMsg {
  return {
    type: "snapshot",
    step: 0,
    tick: 0,
    hour: 8,
    paused: false,
    speed: 1,
    agents: [],
    events: { spawn: [], exit: [] },
    ...partial,
  };
}

describe("scene state", () => {
  let state: SceneState;

  beforeEach(() => {
    state = createSceneState();
    applyMessage(state, hello);
  });

  it("hello primes connection and tick", () => {
    expect(state.connected).toBe(true);
    expect(state.tick).toBe(5);
    expect(state.hello?.kinds.veh?.n_components).toBe(2);
  });

  it("snapshots replace the agent set wholesale", () => {
    applyMessage(
      state,
      snap({
        step: 1,
        tick: 1,
        agents: [
          { id: 1, kind: "veh", x: 0, y: 2, component: 0, tail: [], prior: [[0, 0]] },
          { id: 2, kind: "ped", x: 8, y: 0, component: 1, tail: [] },
        ],
      }),
    );
    expect([...state.agents.keys()]).toEqual([1, 2]);
    applyMessage(
      state,
      snap({
        step: 2,
        tick: 2,
        agents: [{ id: 2, kind: "ped", x: 8.1, y: 0, component: 1, tail: [] }],
      }),
    );
    expect([...state.agents.keys()]).toEqual([2]);
    expect(activeCounts(state)).toEqual({ ped: 1, veh: 0 });
  });

  it("caches a prior from first sight and reuses it later", () => {
    const prior: [number, number][] = [[-20, 2], [20, 2]];
    applyMessage(
      state,
      snap({
        step: 1,
        agents: [
          { id: 7, kind: "veh", x: -20, y: 2, component: 0, tail: [], prior, duration_s: 5.2 },
        ],
      }),
    );
    // later frames omit the prior, as the server sends it only once
    applyMessage(
      state,
      snap({
        step: 2,
        agents: [{ id: 7, kind: "veh", x: -19, y: 2, component: 0, tail: [] }],
      }),
    );
    const agent = state.agents.get(7)!;
    expect(agent.prior).toEqual(prior);
    expect(agent.durationS).toBe(5.2);
    expect(agent.firstSeenStep).toBe(1);
  });

  it("exit events record notes and drop the cached prior", () => {
    applyMessage(
      state,
      snap({
        step: 1,
        agents: [
          { id: 9, kind: "veh", x: 0, y: 2, component: 0, tail: [], prior: [[0, 0]] },
        ],
      }),
    );
    applyMessage(
      state,
      snap({ step: 2, agents: [], events: { spawn: [], exit: [[9, "reached"]] } }),
    );
    expect(state.recentExits).toEqual([{ id: 9, reason: "reached", atStep: 2 }]);
    expect(state.priorCache.has(9)).toBe(false);
  });

  it("queued acks correlate with sent commands in order", () => {
    const a = spawn("veh", 1);
    const b = spawn("ped", 2);
    noteSent(state, a);
    noteSent(state, b);
    applyMessage(state, { type: "queued", command_id: 10 });
    applyMessage(state, { type: "queued", command_id: 11 });
    expect(state.pending.get(10)).toBe(a);
    expect(state.pending.get(11)).toBe(b);
    applyMessage(state, {
      type: "ack",
      command_id: 10,
      applied_tick: 3,
      applied_step: 3,
      info: { type: "spawn" },
    });
    expect(state.pending.has(10)).toBe(false);
    expect(state.lastAck?.command_id).toBe(10);
  });

  it("error-shaped ack info surfaces as an error", () => {
    noteSent(state, spawn("veh", 1));
    applyMessage(state, { type: "queued", command_id: 1 });
    applyMessage(state, {
      type: "ack",
      command_id: 1,
      applied_tick: 2,
      applied_step: 2,
      info: { type: "error", detail: "all prior attempts rejected" },
    });
    expect(state.lastError).toBe("all prior attempts rejected");
  });

  it("metrics keep a bounded history and skip nulls", () => {
    for (let i = 0; i < 70; i++) {
      applyMessage(state, {
        type: "metrics",
        tick: i,
        active: { ped: 0, veh: 0 },
        min_separation: i % 10 === 0 ? null : i,
      });
    }
    expect(state.minSepHistory.length).toBe(60);
    expect(state.minSepHistory).not.toContain(null);
    expect(state.metrics?.tick).toBe(69);
  });

  it("reconnect reset clears agents, priors and command correlation", () => {
    applyMessage(
      state,
      snap({
        step: 1,
        agents: [
          { id: 1, kind: "veh", x: 0, y: 0, component: 0, tail: [], prior: [[0, 0]] },
        ],
      }),
    );
    noteSent(state, spawn("veh", 1));
    resetConnection(state);
    expect(state.agents.size).toBe(0);
    expect(state.priorCache.size).toBe(0);
    expect(state.sentFifo.length).toBe(0);
    expect(state.connected).toBe(false);
  });

  it("colors come from the palette by component", () => {
    applyMessage(
      state,
      snap({
        step: 1,
        agents: [
          { id: 1, kind: "veh", x: 0, y: 0, component: 1, tail: [] },
          { id: 2, kind: "ped", x: 0, y: 0, component: 0, tail: [] },
        ],
      }),
    );
    expect(agentColor(state, state.agents.get(1)!)).toBe("#222222");
    // no pedestrian palette in this hello: fall back
    expect(agentColor(state, state.agents.get(2)!)).toBe("#999999");
  });
});

describe("formatClock", () => {
  it("renders hour fractions as wall time", () => {
    expect(formatClock(8.0)).toBe("08:00:00");
    expect(formatClock(8.00456)).toBe("08:00:16");
    expect(formatClock(23.999999)).toBe("23:59:59");
    expect(formatClock(24.5)).toBe("00:30:00");
  });
});
