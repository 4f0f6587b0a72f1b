/**
 * Draw-gesture model for oriented boxes, kept free of DOM types so it can
 * be unit tested: the first click-drag lays down the p0->p1 edge (fixing
 * the angle and first side), a second drag sets the perpendicular extent,
 * then rotate/resize handles adjust the result. Vertex order is kept
 * clockwise throughout.
 */
import {
  DegenerateBoxError,
  obbAngle,
  obbCenter,
  validateObb,
  verticesFromCenterSizeAngle,
  wrapAngle,
} from "./geometry.js";
import type { ObbLabel, Vertex } from "./types.js";

const MIN_SIDE = 1e-6;

export interface EdgeDraft {
  /** First corner (mouse-down of the first drag). */
  p0: Vertex;
  /** Second corner (mouse-up): p0->p1 is the box's first edge. */
  p1: Vertex;
}

/** Begin a box: the first drag defines the p0->p1 edge. */
export function startEdge(p0: Vertex, p1: Vertex): EdgeDraft {
  if (Math.hypot(p1.x - p0.x, p1.y - p0.y) < MIN_SIDE) {
    throw new DegenerateBoxError("first edge has zero length");
  }
  return { p0, p1 };
}

/**
 * Finish the box: the cursor's perpendicular distance from the p0->p1
 * line sets the second side. The extent is always taken on the clockwise
 * side so the winding stays valid.
 */
export function finishBox(
  draft: EdgeDraft,
  cursor: Vertex,
  classId: number
): ObbLabel {
  const ex = draft.p1.x - draft.p0.x;
  const ey = draft.p1.y - draft.p0.y;
  const len = Math.hypot(ex, ey);
  const height = Math.abs(
    (ex * (cursor.y - draft.p0.y) - ey * (cursor.x - draft.p0.x)) / len
  );
  if (height < MIN_SIDE) {
    throw new DegenerateBoxError("zero-area box");
  }
  // unit normal on the clockwise side (y-down coordinates)
  const nx = -ey / len;
  const ny = ex / len;
  const vertices: [number, number][] = [
    [draft.p0.x, draft.p0.y],
    [draft.p1.x, draft.p1.y],
    [draft.p1.x + nx * height, draft.p1.y + ny * height],
    [draft.p0.x + nx * height, draft.p0.y + ny * height],
  ];
  return makeLabel(vertices, classId);
}

function makeLabel(vertices: [number, number][], classId: number): ObbLabel {
  const problem = validateObb(vertices);
  if (problem) throw new DegenerateBoxError(problem);
  return {
    class_id: classId,
    vertices,
    theta_deg: wrapAngle(obbAngle(vertices)) * (180 / Math.PI),
  };
}

/** Rotate the box about its center (rotation handle). */
export function rotateBox(label: ObbLabel, deltaRad: number): ObbLabel {
  const { x, y } = obbCenter(label.vertices);
  const c = Math.cos(deltaRad);
  const s = Math.sin(deltaRad);
  const vertices = label.vertices.map(([vx, vy]): [number, number] => [
    x + (vx - x) * c - (vy - y) * s,
    y + (vx - x) * s + (vy - y) * c,
  ]);
  return makeLabel(vertices, label.class_id);
}

/** Resize along the box's own axes (side handles). */
export function resizeBox(
  label: ObbLabel,
  widthFactor: number,
  heightFactor: number
): ObbLabel {
  if (widthFactor <= 0 || heightFactor <= 0) {
    throw new DegenerateBoxError("resize factor must be positive");
  }
  const v = label.vertices;
  const { x, y } = obbCenter(v);
  const theta = obbAngle(v);
  const width = Math.hypot(v[1][0] - v[0][0], v[1][1] - v[0][1]) * widthFactor;
  const height = Math.hypot(v[2][0] - v[1][0], v[2][1] - v[1][1]) * heightFactor;
  return makeLabel(
    verticesFromCenterSizeAngle(x, y, width, height, theta),
    label.class_id
  );
}
