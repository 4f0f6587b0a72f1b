/**
 * AnnotationSession: the UI's state machine for one sequence — current
 * frame, local edit buffer, optimistic versioning, prefetch planning and
 * the annotate → propagate → review → correct → re-propagate workflow.
 */
import { ApiClient, StaleVersionError } from "./api.js";
import { validateObb } from "./geometry.js";
import type { ObbLabel, PropagationStatus } from "./types.js";

export const PREFETCH_RADIUS = 5;

export class AnnotationSession {
  currentFrame = 0;
  /** Local, not-yet-saved labels for the current frame. */
  editBuffer: ObbLabel[] = [];
  /** Server version counter for the current frame's annotation. */
  version = 0;
  status: PropagationStatus = { state: "idle" };
  /** Verbatim lines of the server's labels.jsonl export. */
  propagatedLines: string[] = [];
  private propagated = new Map<number, ObbLabel[]>();

  constructor(
    private readonly api: ApiClient,
    readonly sequenceId: string,
    readonly numFrames: number
  ) {}

  /** Frame indexes worth prefetching around the current position. */
  prefetchWindow(): number[] {
    const out: number[] = [];
    for (let d = 1; d <= PREFETCH_RADIUS; d++) {
      for (const i of [this.currentFrame + d, this.currentFrame - d]) {
        if (i >= 0 && i < this.numFrames) out.push(i);
      }
    }
    return out;
  }

  /** Keyboard scrubbing; clamps at the sequence ends. */
  async scrub(delta: number): Promise<void> {
    const next = Math.min(
      Math.max(this.currentFrame + delta, 0),
      this.numFrames - 1
    );
    if (next !== this.currentFrame) await this.goTo(next);
  }

  async goTo(frame: number): Promise<void> {
    if (frame < 0 || frame >= this.numFrames) {
      throw new RangeError(`frame ${frame} outside 0..${this.numFrames - 1}`);
    }
    this.currentFrame = frame;
    const ann = await this.api.getAnnotation(this.sequenceId, frame);
    this.editBuffer = ann.labels;
    this.version = ann.version;
  }

  /** Add a drawn box after re-checking the rectangle invariants. */
  addLabel(label: ObbLabel): void {
    const problem = validateObb(label.vertices);
    if (problem) throw new Error(problem);
    this.editBuffer = [...this.editBuffer, label];
  }

  removeLabel(index: number): void {
    this.editBuffer = this.editBuffer.filter((_, i) => i !== index);
  }

  /**
   * Save the edit buffer. On a stale-version conflict the session reloads
   * the server's labels, replays the local buffer on top of the new
   * version and retries once (single-user optimistic concurrency).
   */
  async save(): Promise<void> {
    const buffer = this.editBuffer;
    try {
      const saved = await this.api.saveAnnotation(
        this.sequenceId,
        this.currentFrame,
        this.version,
        buffer
      );
      this.version = saved.version;
    } catch (err) {
      if (!(err instanceof StaleVersionError)) throw err;
      this.version = err.currentVersion;
      const saved = await this.api.saveAnnotation(
        this.sequenceId,
        this.currentFrame,
        this.version,
        buffer
      );
      this.version = saved.version;
    }
  }

  /**
   * Save the current frame's labels and launch propagation from it; the
   * caller polls refreshStatus() (or awaits completion) to update overlays.
   */
  async saveAndPropagate(): Promise<void> {
    await this.save();
    await this.api.propagate(this.sequenceId, this.currentFrame);
    this.status = await this.api.getStatus(this.sequenceId);
  }

  async refreshStatus(): Promise<PropagationStatus> {
    this.status = await this.api.getStatus(this.sequenceId);
    return this.status;
  }

  async waitForPropagation(): Promise<PropagationStatus> {
    this.status = await this.api.waitForCompletion(this.sequenceId);
    await this.loadPropagated();
    return this.status;
  }

  /**
   * Pull the propagated labels for overlay rendering. The raw export lines
   * are kept verbatim so what the UI shows is exactly what the file says.
   */
  async loadPropagated(): Promise<void> {
    const text = await this.api.fetchLabelsJsonl(this.sequenceId);
    this.propagatedLines = text.split("\n").filter((line) => line.length > 0);
    this.propagated.clear();
    for (const line of this.propagatedLines) {
      const rec = JSON.parse(line) as { frame: number; labels: ObbLabel[] };
      this.propagated.set(rec.frame, rec.labels);
    }
  }

  /** Labels to render on the current frame: local edits win, else export. */
  displayLabels(): ObbLabel[] {
    if (this.editBuffer.length) return this.editBuffer;
    return this.propagated.get(this.currentFrame) ?? [];
  }

  /**
   * Where the review should land after a job ends: the frame where the
   * chain broke (to re-seed there), else stay put.
   */
  reviewTarget(): number {
    if (this.status.state === "broken" && this.status.broken_at !== undefined) {
      return this.status.broken_at;
    }
    return this.currentFrame;
  }
}
