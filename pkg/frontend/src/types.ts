/**
 * Wire types shared with the annotation HTTP service.
 *
 * Geometry convention: image coordinates, y down; oriented boxes are four
 * clockwise corner points; angles on the wire are degrees.
 */

export interface Vertex {
  x: number;
  y: number;
}

/** One oriented box label as serialized in labels.jsonl / annotations. */
export interface ObbLabel {
  class_id: number;
  /** Four [x, y] corner points, clockwise in image coordinates. */
  vertices: [number, number][];
  theta_deg: number;
}

/** Versioned per-frame annotation record. */
export interface Annotation {
  version: number;
  labels: ObbLabel[];
}

export interface SequenceInfo {
  id: string;
  num_frames: number;
  status: PropagationStatus;
}

export interface PropagationStatus {
  state: "idle" | "queued" | "running" | "done" | "broken" | "error";
  from_frame?: number;
  /** First frame the chain could not reach (state === "broken"). */
  broken_at?: number;
  error?: string;
}

export interface SequenceManifest {
  frames: string[];
  fps?: number;
}
