/**
 * Client-side oriented-box geometry: validation mirroring the backend's
 * rectangle rules, angle extraction, and overlay helpers.
 *
 * The UI never computes label transforms itself — these helpers only
 * validate what the user draws and lay out overlay graphics.
 */
import type { ObbLabel, Vertex } from "./types.js";

const TWO_PI = 2 * Math.PI;
const RECT_RTOL = 1e-6;

export class DegenerateBoxError extends Error {}

export function wrapAngle(theta: number): number {
  const m = theta % TWO_PI;
  return m < 0 ? m + TWO_PI : m;
}

/** Angle of the p0->p1 edge in [0, 2*pi), y-down image convention. */
export function obbAngle(vertices: [number, number][]): number {
  const vx = vertices[1][0] - vertices[0][0];
  const vy = vertices[1][1] - vertices[0][1];
  let theta = Math.atan2(vy, vx);
  if (theta < 0) theta += TWO_PI;
  return theta;
}

/**
 * Check the backend's rectangle invariants: four finite points, clockwise
 * winding (positive cross product in y-down coordinates), right angles and
 * equal opposite sides, non-zero area.
 */
export function validateObb(vertices: [number, number][]): string | null {
  if (vertices.length !== 4) return "need exactly 4 vertices";
  for (const [x, y] of vertices) {
    if (!Number.isFinite(x) || !Number.isFinite(y)) return "non-finite vertex";
  }
  const e = (i: number, j: number): Vertex => ({
    x: vertices[j][0] - vertices[i][0],
    y: vertices[j][1] - vertices[i][1],
  });
  const e01 = e(0, 1);
  const e12 = e(1, 2);
  const e23 = e(2, 3);
  const e30 = e(3, 0);
  const w = Math.hypot(e01.x, e01.y);
  const h = Math.hypot(e12.x, e12.y);
  if (w * h <= 0) return "zero-area box";
  const scale = Math.max(w, h);
  const tol = RECT_RTOL * scale;
  if (Math.abs(e01.x + e23.x) > tol || Math.abs(e01.y + e23.y) > tol)
    return "opposite sides not parallel/equal";
  if (Math.abs(e12.x + e30.x) > tol || Math.abs(e12.y + e30.y) > tol)
    return "opposite sides not parallel/equal";
  const dot = e01.x * e12.x + e01.y * e12.y;
  if (Math.abs(dot) > tol * scale) return "corners are not right angles";
  const cross = e01.x * e12.y - e01.y * e12.x;
  if (cross <= 0) return "vertices must wind clockwise (image coordinates)";
  return null;
}

/** Build the four clockwise corners from center, size and angle. */
export function verticesFromCenterSizeAngle(
  cx: number,
  cy: number,
  width: number,
  height: number,
  theta: number
): [number, number][] {
  const c = Math.cos(theta);
  const s = Math.sin(theta);
  const local: [number, number][] = [
    [-width / 2, -height / 2],
    [width / 2, -height / 2],
    [width / 2, height / 2],
    [-width / 2, height / 2],
  ];
  return local.map(([x, y]): [number, number] => [
    cx + x * c - y * s,
    cy + x * s + y * c,
  ]);
}

export function obbCenter(vertices: [number, number][]): Vertex {
  let x = 0;
  let y = 0;
  for (const [vx, vy] of vertices) {
    x += vx;
    y += vy;
  }
  return { x: x / 4, y: y / 4 };
}

/** Angles shown in the UI carry 0.1-degree precision. */
export function formatThetaDeg(thetaRad: number): string {
  return `${(wrapAngle(thetaRad) * (180 / Math.PI)).toFixed(1)}°`;
}

/**
 * Endpoints of the orientation arrow: from the box center along its
 * longest axis (the p0->p1 edge when width >= height, else p1->p2).
 */
export function orientationArrow(label: ObbLabel): [Vertex, Vertex] {
  const v = label.vertices;
  const w = Math.hypot(v[1][0] - v[0][0], v[1][1] - v[0][1]);
  const h = Math.hypot(v[2][0] - v[1][0], v[2][1] - v[1][1]);
  const center = obbCenter(v);
  const axis: Vertex =
    w >= h
      ? { x: (v[1][0] - v[0][0]) / w, y: (v[1][1] - v[0][1]) / w }
      : { x: (v[2][0] - v[1][0]) / h, y: (v[2][1] - v[1][1]) / h };
  const len = Math.max(w, h) / 2;
  return [
    center,
    { x: center.x + axis.x * len, y: center.y + axis.y * len },
  ];
}
