// Client-side mirror of the simulation state.  The server is the only
// authority: every snapshot replaces the agent set wholesale, and the
// store just caches the pieces the server sends once per connection
// (each agent's prior polyline) so later frames can still draw them.

import type {
  AckMsg,
  AgentKindName,
  Command,
  HelloMsg,
  MetricsMsg,
  ServerMessage,
  SnapshotMsg,
} from "./protocol";

export interface AgentView {
  id: number;
  kind: AgentKindName;
  x: number;
  y: number;
  component: number;
  tail: [number, number][];
  prior?: [number, number][];
  durationS?: number;
  firstSeenStep: number;
}

export interface ExitNote {
  id: number;
  reason: string;
  atStep: number;
}

interface CachedPrior {
  prior: [number, number][];
  durationS?: number;
}

export interface SceneState {
  connected: boolean;
  hello: HelloMsg | null;
  step: number;
  tick: number;
  hour: number;
  paused: boolean;
  speed: number;
  agents: Map<number, AgentView>;
  priorCache: Map<number, CachedPrior>;
  recentExits: ExitNote[];
  metrics: MetricsMsg | null;
  minSepHistory: number[];
  sentFifo: Command[];
  pending: Map<number, Command>;
  lastAck: AckMsg | null;
  lastError: string | null;
}

const EXIT_NOTES_KEPT = 20;
const MIN_SEP_KEPT = 60;

export function createSceneState(): SceneState {
  return {
    connected: false,
    hello: null,
    step: 0,
    tick: 0,
    hour: 0,
    paused: false,
    speed: 1,
    agents: new Map(),
    priorCache: new Map(),
    recentExits: [],
    metrics: null,
    minSepHistory: [],
    sentFifo: [],
    pending: new Map(),
    lastAck: null,
    lastError: null,
  };
}

/** Record a command the moment it goes out; queued acks match FIFO. */
export function noteSent(state: SceneState, cmd: Command): void {
  state.sentFifo.push(cmd);
}

export function resetConnection(state: SceneState): void {
  // a reconnect is a new server-side connection: priors will be resent,
  // queued correlation restarts, live agents arrive with the first frame
  state.connected = false;
  state.agents = new Map();
  state.priorCache = new Map();
  state.sentFifo = [];
  state.pending = new Map();
}

function applySnapshot(state: SceneState, msg: SnapshotMsg): void {
  const previous = state.agents;
  const next = new Map<number, AgentView>();
  for (const a of msg.agents) {
    if (a.prior !== undefined) {
      state.priorCache.set(a.id, { prior: a.prior, durationS: a.duration_s });
    }
    const cached = state.priorCache.get(a.id);
    const before = previous.get(a.id);
    next.set(a.id, {
      id: a.id,
      kind: a.kind,
      x: a.x,
      y: a.y,
      component: a.component,
      tail: a.tail,
      prior: cached?.prior,
      durationS: cached?.durationS,
      firstSeenStep: before ? before.firstSeenStep : msg.step,
    });
  }
  state.agents = next;
  state.step = msg.step;
  state.tick = msg.tick;
  state.hour = msg.hour;
  state.paused = msg.paused;
  state.speed = msg.speed;
  for (const [id, reason] of msg.events.exit) {
    state.recentExits.push({ id, reason, atStep: msg.step });
    state.priorCache.delete(id);
  }
  if (state.recentExits.length > EXIT_NOTES_KEPT) {
    state.recentExits.splice(0, state.recentExits.length - EXIT_NOTES_KEPT);
  }
}

export function applyMessage(state: SceneState, msg: ServerMessage): void {
  switch (msg.type) {
    case "hello":
      state.hello = msg;
      state.tick = msg.tick;
      state.connected = true;
      return;
    case "snapshot":
      applySnapshot(state, msg);
      return;
    case "queued": {
      const cmd = state.sentFifo.shift();
      if (cmd !== undefined) state.pending.set(msg.command_id, cmd);
      return;
    }
    case "ack":
      state.pending.delete(msg.command_id);
      state.lastAck = msg;
      if (msg.info.type === "error") {
        state.lastError = String(msg.info.detail ?? "command failed");
      }
      return;
    case "metrics":
      state.metrics = msg;
      if (msg.min_separation !== null) {
        state.minSepHistory.push(msg.min_separation);
        if (state.minSepHistory.length > MIN_SEP_KEPT) {
          state.minSepHistory.shift();
        }
      }
      return;
    case "error":
      state.lastError = msg.detail;
      return;
  }
}

export function paletteFor(state: SceneState, kind: AgentKindName): string[] {
  return state.hello?.kinds[kind]?.palette ?? [];
}

export function agentColor(state: SceneState, agent: AgentView): string {
  const palette = paletteFor(state, agent.kind);
  return palette[agent.component] ?? "#999999";
}

export function activeCounts(state: SceneState): Record<AgentKindName, number> {
  const counts: Record<AgentKindName, number> = { ped: 0, veh: 0 };
  for (const a of state.agents.values()) counts[a.kind] += 1;
  return counts;
}

/** Hour-of-day as a wall clock string, e.g. 8.00456 -> "08:00:16". */
export function formatClock(hour: number): string {
  const total = Math.floor((((hour % 24) + 24) % 24) * 3600);
  const h = Math.floor(total / 3600);
  const m = Math.floor((total % 3600) / 60);
  const s = total % 60;
  const pad = (v: number) => String(v).padStart(2, "0");
  return `${pad(h)}:${pad(m)}:${pad(s)}`;
}
