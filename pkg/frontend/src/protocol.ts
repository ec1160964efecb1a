// Message types for the simulation control socket, schema version 1.
// Shapes mirror docs/protocol.md in the repository root.

export type AgentKindName = "ped" | "veh";

export interface EngineConfig {
  dt: number;
  l_ob: number;
  l_pd: number;
  exit_eps: number;
  start_hour: number;
  refine: boolean;
}

export interface ComponentSummary {
  index: number;
  weight: number;
  waypoints: [number, number][];
}

export interface KindInfo {
  n_components: number;
  palette: string[];
  components: ComponentSummary[];
}

export interface HelloMsg {
  type: "hello";
  schema: number;
  config: EngineConfig;
  kinds: Partial<Record<AgentKindName, KindInfo>>;
  tick: number;
}

export interface SnapshotAgent {
  id: number;
  kind: AgentKindName;
  x: number;
  y: number;
  component: number;
  tail: [number, number][];
  // present only the first time this connection sees the agent
  prior?: [number, number][];
  duration_s?: number;
}

export type ExitReason = "reached" | "timeout";

export interface SnapshotMsg {
  type: "snapshot";
  step: number;
  tick: number;
  hour: number;
  paused: boolean;
  speed: number;
  agents: SnapshotAgent[];
  events: { spawn: number[]; exit: [number, ExitReason][] };
}

export interface QueuedMsg {
  type: "queued";
  command_id: number;
}

export interface AckMsg {
  type: "ack";
  command_id: number;
  applied_tick: number;
  applied_step: number;
  info: Record<string, unknown> & { type: string };
}

export interface MetricsMsg {
  type: "metrics";
  tick: number;
  active: Record<AgentKindName, number>;
  min_separation: number | null;
}

export interface ErrorMsg {
  type: "error";
  detail: string;
}

export type ServerMessage =
  | HelloMsg
  | SnapshotMsg
  | QueuedMsg
  | AckMsg
  | MetricsMsg
  | ErrorMsg;

const SERVER_TYPES = new Set([
  "hello",
  "snapshot",
  "queued",
  "ack",
  "metrics",
  "error",
]);

export class ProtocolError extends Error {}

export function parseServerMessage(raw: string): ServerMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch (e) {
    throw new ProtocolError(`unparseable frame: ${(e as Error).message}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ProtocolError("frame is not an object");
  }
  const type = (obj as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) {
    throw new ProtocolError(`unknown message type ${JSON.stringify(type)}`);
  }
  return obj as ServerMessage;
}

// ---- commands ------------------------------------------------------------

export interface PauseCmd {
  type: "pause";
}
export interface ResumeCmd {
  type: "resume";
}
export interface SetSpeedCmd {
  type: "set_speed";
  factor: number;
}
export interface SpawnCmd {
  type: "spawn";
  kind: AgentKindName;
  count: number;
  components?: number[];
}
export interface SetConditionSetCmd {
  type: "set_condition_set";
  kind: AgentKindName;
  components: number[] | null;
}
export interface InjectScenarioCmd {
  type: "inject_scenario";
  components_ped?: number[];
  components_veh?: number[];
}
export interface SnapshotRequestCmd {
  type: "snapshot";
}

export type Command =
  | PauseCmd
  | ResumeCmd
  | SetSpeedCmd
  | SpawnCmd
  | SetConditionSetCmd
  | InjectScenarioCmd
  | SnapshotRequestCmd;

export const pause = (): PauseCmd => ({ type: "pause" });
export const resume = (): ResumeCmd => ({ type: "resume" });

export function setSpeed(factor: number): SetSpeedCmd {
  if (!(factor > 0)) throw new ProtocolError(`speed factor must be positive, got ${factor}`);
  return { type: "set_speed", factor };
}

export function spawn(
  kind: AgentKindName,
  count = 1,
  components?: number[],
): SpawnCmd {
  if (!Number.isInteger(count) || count < 1) {
    throw new ProtocolError(`spawn count must be a positive integer, got ${count}`);
  }
  const cmd: SpawnCmd = { type: "spawn", kind, count };
  if (components !== undefined) cmd.components = components;
  return cmd;
}

export function setConditionSet(
  kind: AgentKindName,
  components: number[] | null,
): SetConditionSetCmd {
  return { type: "set_condition_set", kind, components };
}

export function injectScenario(
  componentsPed?: number[],
  componentsVeh?: number[],
): InjectScenarioCmd {
  const cmd: InjectScenarioCmd = { type: "inject_scenario" };
  if (componentsPed !== undefined) cmd.components_ped = componentsPed;
  if (componentsVeh !== undefined) cmd.components_veh = componentsVeh;
  return cmd;
}

export const requestSnapshot = (): SnapshotRequestCmd => ({ type: "snapshot" });

export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}
