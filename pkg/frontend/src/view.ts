// Camera math between world meters (y up) and canvas pixels (y down).

export interface Camera {
  zoom: number; // pixels per meter
  panX: number; // screen x of world origin
  panY: number; // screen y of world origin
}

export interface Point {
  x: number;
  y: number;
}

export const MIN_ZOOM = 2;
export const MAX_ZOOM = 200;

export function clampZoom(zoom: number): number {
  return Math.max(MIN_ZOOM, Math.min(MAX_ZOOM, zoom));
}

export function worldToScreen(cam: Camera, wx: number, wy: number): Point {
  return { x: cam.panX + wx * cam.zoom, y: cam.panY - wy * cam.zoom };
}

export function screenToWorld(cam: Camera, sx: number, sy: number): Point {
  return { x: (sx - cam.panX) / cam.zoom, y: (cam.panY - sy) / cam.zoom };
}

export function pan(cam: Camera, dxPx: number, dyPx: number): Camera {
  return { zoom: cam.zoom, panX: cam.panX + dxPx, panY: cam.panY + dyPx };
}

export function zoomAt(
  cam: Camera,
  factor: number,
  anchorX: number,
  anchorY: number,
): Camera {
  const anchor = screenToWorld(cam, anchorX, anchorY);
  const zoom = clampZoom(cam.zoom * factor);
  return {
    zoom,
    panX: anchorX - anchor.x * zoom,
    panY: anchorY + anchor.y * zoom,
  };
}

export function fitToExtent(
  halfExtent: number,
  width: number,
  height: number,
  paddingPx = 24,
): Camera {
  const side = 2 * halfExtent;
  const usable = Math.max(1, Math.min(width, height) - 2 * paddingPx);
  return {
    zoom: clampZoom(usable / side),
    panX: width / 2,
    panY: height / 2,
  };
}
