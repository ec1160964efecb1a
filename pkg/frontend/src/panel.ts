// Sidebar wiring: status readouts, transport controls, spawn and
// component-restriction controls, and the event log.  All elements are
// static markup in index.html; this module only binds them.

import type { SocketClient } from "./net";
import type { AgentKindName, Command, HelloMsg } from "./protocol";
import {
  injectScenario,
  pause,
  resume,
  setConditionSet,
  setSpeed,
  spawn,
} from "./protocol";
import type { SceneState } from "./state";
import { activeCounts, formatClock, noteSent } from "./state";
import { drawComponentThumb } from "./render";

const LOG_LIMIT = 40;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

export class Panel {
  private readonly state: SceneState;
  private readonly socket: SocketClient;
  private readonly selection: Record<AgentKindName, Set<number>> = {
    ped: new Set(),
    veh: new Set(),
  };
  private legendBuilt = false;

  constructor(state: SceneState, socket: SocketClient) {
    this.state = state;
    this.socket = socket;
    this.bind();
  }

  private send(cmd: Command): void {
    noteSent(this.state, cmd);
    this.socket.send(cmd);
    this.log(`sent ${cmd.type}`);
  }

  private bind(): void {
    el<HTMLButtonElement>("btn-pause").addEventListener("click", () =>
      this.send(this.state.paused ? resume() : pause()),
    );
    const speed = el<HTMLInputElement>("speed-slider");
    speed.addEventListener("change", () => {
      const factor = Number(speed.value);
      if (factor > 0) this.send(setSpeed(factor));
    });
    el<HTMLButtonElement>("btn-spawn").addEventListener("click", () => {
      const kind = this.spawnKind();
      const count = Math.max(1, Number(el<HTMLInputElement>("spawn-count").value) || 1);
      const sel = [...this.selection[kind]].sort((a, b) => a - b);
      this.send(spawn(kind, count, sel.length > 0 ? sel : undefined));
    });
    el<HTMLButtonElement>("btn-restrict").addEventListener("click", () => {
      const kind = this.spawnKind();
      const sel = [...this.selection[kind]].sort((a, b) => a - b);
      this.send(setConditionSet(kind, sel.length > 0 ? sel : null));
    });
    el<HTMLButtonElement>("btn-clear-restrict").addEventListener("click", () =>
      this.send(setConditionSet(this.spawnKind(), null)),
    );
    el<HTMLButtonElement>("btn-inject").addEventListener("click", () => {
      const ped = [...this.selection.ped].sort((a, b) => a - b);
      const veh = [...this.selection.veh].sort((a, b) => a - b);
      this.send(
        injectScenario(
          ped.length > 0 ? ped : undefined,
          veh.length > 0 ? veh : undefined,
        ),
      );
    });
  }

  private spawnKind(): AgentKindName {
    return el<HTMLSelectElement>("spawn-kind").value === "veh" ? "veh" : "ped";
  }

  log(line: string): void {
    const host = el<HTMLDivElement>("event-log");
    const row = document.createElement("div");
    row.textContent = `[${this.state.tick}] ${line}`;
    host.prepend(row);
    while (host.childNodes.length > LOG_LIMIT) host.removeChild(host.lastChild!);
  }

  private buildLegend(hello: HelloMsg): void {
    const host = el<HTMLDivElement>("legend");
    host.innerHTML = "";
    for (const kind of ["ped", "veh"] as AgentKindName[]) {
      const info = hello.kinds[kind];
      if (!info) continue;
      const title = document.createElement("div");
      title.className = "legend-title";
      title.textContent = kind === "ped" ? "pedestrian routes" : "vehicle routes";
      host.appendChild(title);
      const grid = document.createElement("div");
      grid.className = "legend-grid";
      for (const comp of info.components) {
        const cell = document.createElement("div");
        cell.className = "legend-cell";
        cell.title = `component ${comp.index}, weight ${comp.weight.toFixed(3)}`;
        const canvas = document.createElement("canvas");
        canvas.width = 44;
        canvas.height = 44;
        const ctx = canvas.getContext("2d");
        if (ctx) {
          drawComponentThumb(
            ctx,
            comp.waypoints,
            info.palette[comp.index] ?? "#999",
            44,
          );
        }
        cell.appendChild(canvas);
        const tag = document.createElement("span");
        tag.textContent = String(comp.index);
        cell.appendChild(tag);
        cell.addEventListener("click", () => {
          const sel = this.selection[kind];
          if (sel.has(comp.index)) sel.delete(comp.index);
          else sel.add(comp.index);
          cell.classList.toggle("selected", sel.has(comp.index));
        });
        grid.appendChild(cell);
      }
      host.appendChild(grid);
    }
    this.legendBuilt = true;
  }

  /** Refresh the readouts; called from the render loop. */
  update(): void {
    const s = this.state;
    if (s.hello !== null && !this.legendBuilt) this.buildLegend(s.hello);

    el("status-clock").textContent = formatClock(s.hour);
    el("status-tick").textContent = String(s.tick);
    const counts = activeCounts(s);
    el("status-counts").textContent = `${counts.ped} ped / ${counts.veh} veh`;
    el("status-speed").textContent = s.paused ? "paused" : `${s.speed.toFixed(2)}x`;
    const sep = s.metrics?.min_separation;
    el("status-minsep").textContent =
      sep === null || sep === undefined ? "-" : `${sep.toFixed(2)} m`;
    el<HTMLButtonElement>("btn-pause").textContent = s.paused ? "resume" : "pause";

    if (s.lastError !== null) {
      this.log(`error: ${s.lastError}`);
      s.lastError = null;
    }
    if (s.lastAck !== null) {
      const info = s.lastAck.info;
      this.log(`ack #${s.lastAck.command_id} ${info.type} @ tick ${s.lastAck.applied_tick}`);
      s.lastAck = null;
    }
    while (s.recentExits.length > 0) {
      const note = s.recentExits.shift()!;
      this.log(`agent ${note.id} left (${note.reason})`);
    }
  }

  setConnection(statusText: string): void {
    el("status-conn").textContent = statusText;
  }
}
