import { SocketClient, socketUrl } from "./net";
import { Panel } from "./panel";
import { render, REGION_HALF } from "./render";
import { applyMessage, createSceneState, resetConnection } from "./state";
import type { Camera } from "./view";
import { fitToExtent, pan, zoomAt } from "./view";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d");
if (!ctx) throw new Error("2d canvas context unavailable");

const state = createSceneState();
let cam: Camera = { zoom: 10, panX: 0, panY: 0 };
let fitted = false;

function resize(): void {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth;
  const h = canvas.clientHeight;
  canvas.width = Math.max(1, Math.round(w * dpr));
  canvas.height = Math.max(1, Math.round(h * dpr));
  if (!fitted && w > 0) {
    cam = fitToExtent(REGION_HALF + 2, canvas.width, canvas.height);
    fitted = true;
  }
}
window.addEventListener("resize", resize);

const socket = new SocketClient(socketUrl(window.location), {
  onMessage: (msg) => applyMessage(state, msg),
  onStatus: (status, attempt) => {
    panel.setConnection(
      status === "waiting" ? `reconnecting (attempt ${attempt})` : status,
    );
    if (status === "waiting") resetConnection(state);
  },
  onProtocolError: (err) => panel.log(`protocol: ${err.message}`),
});
const panel = new Panel(state, socket);
socket.connect();

// drag to pan, wheel to zoom around the cursor
let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("pointerdown", (e) => {
  dragging = true;
  lastX = e.clientX;
  lastY = e.clientY;
  canvas.setPointerCapture(e.pointerId);
});
canvas.addEventListener("pointermove", (e) => {
  if (!dragging) return;
  const dpr = window.devicePixelRatio || 1;
  cam = pan(cam, (e.clientX - lastX) * dpr, (e.clientY - lastY) * dpr);
  lastX = e.clientX;
  lastY = e.clientY;
});
canvas.addEventListener("pointerup", () => {
  dragging = false;
});
canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  const dpr = window.devicePixelRatio || 1;
  const rect = canvas.getBoundingClientRect();
  const x = (e.clientX - rect.left) * dpr;
  const y = (e.clientY - rect.top) * dpr;
  cam = zoomAt(cam, Math.exp(-e.deltaY * 0.0015), x, y);
});

const showPriors = document.getElementById("toggle-priors") as HTMLInputElement;
const showTails = document.getElementById("toggle-tails") as HTMLInputElement;

function frame(): void {
  render(ctx!, state, cam, canvas.width, canvas.height, {
    showPriors: showPriors.checked,
    showTails: showTails.checked,
  });
  panel.update();
  requestAnimationFrame(frame);
}

resize();
requestAnimationFrame(frame);
