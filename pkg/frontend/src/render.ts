// Canvas drawing.  The backdrop mirrors the simulated junction layout:
// two crossing roads with lanes at +/-2 m and crosswalks at +/-8 m,
// inside a 40 m square region.

import type { SceneState, AgentView } from "./state";
import { agentColor } from "./state";
import type { Camera } from "./view";
import { worldToScreen } from "./view";

export const REGION_HALF = 20;
const ROAD_HALF = 3.5;
const WALK_OFFSET = 8;
const SPAWN_FLASH_STEPS = 5;

export interface RenderOptions {
  showPriors: boolean;
  showTails: boolean;
}

export function headingOf(agent: AgentView): number {
  const tail = agent.tail;
  for (let i = tail.length - 1; i > 0; i--) {
    const a = tail[i - 1]!;
    const b = tail[i]!;
    const dx = b[0] - a[0];
    const dy = b[1] - a[1];
    if (dx * dx + dy * dy > 1e-8) return Math.atan2(dy, dx);
  }
  return 0;
}

function path(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  pts: readonly (readonly [number, number])[],
): void {
  ctx.beginPath();
  pts.forEach(([wx, wy], i) => {
    const p = worldToScreen(cam, wx, wy);
    if (i === 0) ctx.moveTo(p.x, p.y);
    else ctx.lineTo(p.x, p.y);
  });
}

function drawBackdrop(ctx: CanvasRenderingContext2D, cam: Camera): void {
  const z = cam.zoom;
  const tl = worldToScreen(cam, -REGION_HALF, REGION_HALF);

  ctx.fillStyle = "#20261f";
  ctx.fillRect(tl.x, tl.y, 2 * REGION_HALF * z, 2 * REGION_HALF * z);

  ctx.fillStyle = "#34393e";
  const roadTl = worldToScreen(cam, -REGION_HALF, ROAD_HALF);
  ctx.fillRect(roadTl.x, roadTl.y, 2 * REGION_HALF * z, 2 * ROAD_HALF * z);
  const roadTl2 = worldToScreen(cam, -ROAD_HALF, REGION_HALF);
  ctx.fillRect(roadTl2.x, roadTl2.y, 2 * ROAD_HALF * z, 2 * REGION_HALF * z);

  ctx.strokeStyle = "#c9b458";
  ctx.lineWidth = Math.max(1, 0.12 * z);
  ctx.setLineDash([0.9 * z, 1.1 * z]);
  for (const [a, b] of [
    [
      [-REGION_HALF, 0],
      [-ROAD_HALF, 0],
    ],
    [
      [ROAD_HALF, 0],
      [REGION_HALF, 0],
    ],
    [
      [0, -REGION_HALF],
      [0, -ROAD_HALF],
    ],
    [
      [0, ROAD_HALF],
      [0, REGION_HALF],
    ],
  ] as [number, number][][]) {
    path(ctx, cam, [a!, b!]);
    ctx.stroke();
  }
  ctx.setLineDash([]);

  // zebra stripes where the walklines cross each road
  ctx.fillStyle = "rgba(230, 230, 230, 0.35)";
  const stripe = 0.35 * z;
  for (const off of [-WALK_OFFSET, WALK_OFFSET]) {
    for (let k = -3; k <= 3; k++) {
      const p = worldToScreen(cam, off + k * 0.7, ROAD_HALF);
      ctx.fillRect(p.x, p.y, stripe, 2 * ROAD_HALF * z);
      const q = worldToScreen(cam, -ROAD_HALF, off + k * 0.7 + 0.35);
      ctx.fillRect(q.x, q.y, 2 * ROAD_HALF * z, stripe);
    }
  }

  ctx.strokeStyle = "#444c44";
  ctx.lineWidth = 1;
  ctx.strokeRect(tl.x, tl.y, 2 * REGION_HALF * z, 2 * REGION_HALF * z);
}

function drawAgent(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  state: SceneState,
  agent: AgentView,
): void {
  const p = worldToScreen(cam, agent.x, agent.y);
  const color = agentColor(state, agent);
  ctx.fillStyle = color;
  if (agent.kind === "veh") {
    const len = 2.2 * cam.zoom;
    const wid = 1.1 * cam.zoom;
    ctx.save();
    ctx.translate(p.x, p.y);
    ctx.rotate(-headingOf(agent));
    ctx.fillRect(-len / 2, -wid / 2, len, wid);
    ctx.strokeStyle = "rgba(0,0,0,0.5)";
    ctx.lineWidth = 1;
    ctx.strokeRect(-len / 2, -wid / 2, len, wid);
    ctx.restore();
  } else {
    ctx.beginPath();
    ctx.arc(p.x, p.y, Math.max(2, 0.4 * cam.zoom), 0, 2 * Math.PI);
    ctx.fill();
  }
  if (state.step - agent.firstSeenStep < SPAWN_FLASH_STEPS) {
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 1.4 * cam.zoom, 0, 2 * Math.PI);
    ctx.stroke();
  }
}

export function render(
  ctx: CanvasRenderingContext2D,
  state: SceneState,
  cam: Camera,
  width: number,
  height: number,
  options: RenderOptions,
): void {
  ctx.fillStyle = "#15181c";
  ctx.fillRect(0, 0, width, height);
  drawBackdrop(ctx, cam);

  if (options.showPriors) {
    ctx.lineWidth = 1;
    ctx.setLineDash([4, 4]);
    for (const agent of state.agents.values()) {
      if (!agent.prior || agent.prior.length < 2) continue;
      ctx.strokeStyle = agentColor(state, agent);
      ctx.globalAlpha = 0.3;
      path(ctx, cam, agent.prior);
      ctx.stroke();
    }
    ctx.setLineDash([]);
    ctx.globalAlpha = 1;
  }

  if (options.showTails) {
    ctx.lineWidth = Math.max(1, 0.15 * cam.zoom);
    for (const agent of state.agents.values()) {
      if (agent.tail.length < 2) continue;
      ctx.strokeStyle = agentColor(state, agent);
      ctx.globalAlpha = 0.55;
      path(ctx, cam, agent.tail);
      ctx.stroke();
    }
    ctx.globalAlpha = 1;
  }

  for (const agent of state.agents.values()) {
    drawAgent(ctx, cam, state, agent);
  }
}

/** Draw one component's mean polyline into a small legend canvas. */
export function drawComponentThumb(
  ctx: CanvasRenderingContext2D,
  waypoints: readonly (readonly [number, number])[],
  color: string,
  size: number,
): void {
  ctx.clearRect(0, 0, size, size);
  ctx.fillStyle = "#20261f";
  ctx.fillRect(0, 0, size, size);
  if (waypoints.length < 2) return;
  const scale = size / (2 * REGION_HALF);
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  waypoints.forEach(([wx, wy], i) => {
    const x = size / 2 + wx * scale;
    const y = size / 2 - wy * scale;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  const last = waypoints[waypoints.length - 1]!;
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(size / 2 + last[0] * scale, size / 2 - last[1] * scale, 2, 0, 2 * Math.PI);
  ctx.fill();
}
