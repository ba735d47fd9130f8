/** Field diagram geometry: metres-to-canvas mapping and key-point hit test.
 *
 * Pure functions so the picking logic is unit-testable without a canvas.
 */

import type { FieldModel } from "./types.js";

export interface DiagramTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
  canvasHeight: number;
}

export const HIT_RADIUS_PX = 8;

export function diagramTransform(
  field: FieldModel,
  canvasWidth: number,
  canvasHeight: number,
  margin = 16,
): DiagramTransform {
  const scale = Math.min(
    (canvasWidth - 2 * margin) / field.length,
    (canvasHeight - 2 * margin) / field.width,
  );
  return { scale, offsetX: margin, offsetY: margin, canvasHeight };
}

/** Field metres to canvas pixels (field y up, canvas y down). */
export function toCanvas(
  t: DiagramTransform,
  x: number,
  y: number,
): [number, number] {
  return [t.offsetX + x * t.scale, t.canvasHeight - (t.offsetY + y * t.scale)];
}

/** Name of the key point within the hit radius of a canvas click, or null. */
export function hitTestKeyPoint(
  field: FieldModel,
  t: DiagramTransform,
  clickX: number,
  clickY: number,
  radius = HIT_RADIUS_PX,
): string | null {
  let best: string | null = null;
  let bestDist = radius;
  for (const [name, [x, y]] of Object.entries(field.key_points)) {
    const [cx, cy] = toCanvas(t, x, y);
    const dist = Math.hypot(cx - clickX, cy - clickY);
    if (dist <= bestDist) {
      best = name;
      bestDist = dist;
    }
  }
  return best;
}

export function drawFieldDiagram(
  ctx: CanvasRenderingContext2D,
  field: FieldModel,
  t: DiagramTransform,
  pendingKeyPoint: string | null,
  usedKeyPoints: string[],
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.fillStyle = "#0a5c2e";
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.strokeStyle = "#e8f5e9";
  ctx.lineWidth = 1.2;
  for (const seg of field.segments) {
    ctx.beginPath();
    ctx.moveTo(...toCanvas(t, seg.p0[0], seg.p0[1]));
    ctx.lineTo(...toCanvas(t, seg.p1[0], seg.p1[1]));
    ctx.stroke();
  }
  for (const arc of field.arcs) {
    ctx.beginPath();
    const steps = 48;
    for (let i = 0; i <= steps; i++) {
      const a = ((arc.start_deg + ((arc.end_deg - arc.start_deg) * i) / steps) * Math.PI) / 180;
      const x = arc.center[0] + arc.radius * Math.cos(a);
      const y = arc.center[1] + arc.radius * Math.sin(a);
      const [cx, cy] = toCanvas(t, x, y);
      if (i === 0) ctx.moveTo(cx, cy);
      else ctx.lineTo(cx, cy);
    }
    ctx.stroke();
  }
  for (const [name, [x, y]] of Object.entries(field.key_points)) {
    const [cx, cy] = toCanvas(t, x, y);
    ctx.beginPath();
    ctx.arc(cx, cy, name === pendingKeyPoint ? 6 : 4, 0, 2 * Math.PI);
    ctx.fillStyle =
      name === pendingKeyPoint
        ? "#ffeb3b"
        : usedKeyPoints.includes(name)
          ? "#2196f3"
          : "#e53935";
    ctx.fill();
  }
}
