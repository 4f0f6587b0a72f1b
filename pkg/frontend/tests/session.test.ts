import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotationSession, PREFETCH_RADIUS } from "../src/session.js";
import type { Annotation, ObbLabel } from "../src/types.js";

const squareLabel: ObbLabel = {
  class_id: 0,
  vertices: [
    [0, 0],
    [10, 0],
    [10, 10],
    [0, 10],
  ],
  theta_deg: 0,
};

/**
 * Minimal in-memory stand-in for the annotation service, implementing the
 * same optimistic-versioning contract over a fake fetch.
 */
function fakeService() {
  const annotations = new Map<number, Annotation>();
  let status = { state: "idle" as const };

  const fetchImpl: typeof fetch = async (input, init) => {
    const url = String(input);
    const respond = (code: number, body: unknown) =>
      new Response(JSON.stringify(body), { status: code });

    const annMatch = url.match(/\/annotations\/(\d+)$/);
    if (annMatch) {
      const frame = Number(annMatch[1]);
      const current = annotations.get(frame) ?? { version: 0, labels: [] };
      if (!init || init.method !== "POST") return respond(200, current);
      const payload = JSON.parse(String(init.body));
      if (payload.version !== current.version) {
        return respond(409, {
          detail: { message: "stale version", version: current.version },
        });
      }
      const next = { version: current.version + 1, labels: payload.labels };
      annotations.set(frame, next);
      return respond(200, next);
    }
    if (url.endsWith("/status")) return respond(200, status);
    if (url.endsWith("/propagate")) return respond(202, { state: "queued" });
    return respond(404, { detail: "not found" });
  };

  return {
    annotations,
    bumpVersion(frame: number) {
      const current = annotations.get(frame) ?? { version: 0, labels: [] };
      annotations.set(frame, { ...current, version: current.version + 1 });
    },
    client: new ApiClient("http://fake", fetchImpl),
  };
}

describe("AnnotationSession", () => {
  it("loads the server annotation when moving to a frame", async () => {
    const svc = fakeService();
    svc.annotations.set(3, { version: 2, labels: [squareLabel] });
    const session = new AnnotationSession(svc.client, "s", 10);
    await session.goTo(3);
    expect(session.version).toBe(2);
    expect(session.editBuffer).toEqual([squareLabel]);
  });

  it("validates boxes before accepting them into the buffer", () => {
    const svc = fakeService();
    const session = new AnnotationSession(svc.client, "s", 10);
    const bad = { ...squareLabel, vertices: [...squareLabel.vertices].reverse() };
    expect(() => session.addLabel(bad as ObbLabel)).toThrow(/clockwise/);
  });

  it("saves and tracks the new version", async () => {
    const svc = fakeService();
    const session = new AnnotationSession(svc.client, "s", 10);
    await session.goTo(0);
    session.addLabel(squareLabel);
    await session.save();
    expect(session.version).toBe(1);
    expect(svc.annotations.get(0)!.labels).toEqual([squareLabel]);
  });

  it("replays the edit buffer after a stale-version conflict", async () => {
    const svc = fakeService();
    const session = new AnnotationSession(svc.client, "s", 10);
    await session.goTo(0);
    session.addLabel(squareLabel);
    svc.bumpVersion(0); // concurrent writer beat us to it
    await session.save();
    expect(session.version).toBe(2);
    expect(svc.annotations.get(0)!.labels).toEqual([squareLabel]);
  });

  it("prefetches up to 5 frames on each side, clamped to the sequence", () => {
    const svc = fakeService();
    const session = new AnnotationSession(svc.client, "s", 30);
    session.currentFrame = 0;
    expect(session.prefetchWindow()).toEqual([1, 2, 3, 4, 5]);
    session.currentFrame = 15;
    const window = session.prefetchWindow();
    expect(window).toHaveLength(2 * PREFETCH_RADIUS);
    expect(Math.min(...window)).toBe(10);
    expect(Math.max(...window)).toBe(20);
  });

  it("scrubbing clamps at the sequence ends", async () => {
    const svc = fakeService();
    const session = new AnnotationSession(svc.client, "s", 3);
    await session.goTo(2);
    await session.scrub(5);
    expect(session.currentFrame).toBe(2);
    await session.scrub(-10);
    expect(session.currentFrame).toBe(0);
  });

  it("review lands on the broken frame after a failed chain", () => {
    const svc = fakeService();
    const session = new AnnotationSession(svc.client, "s", 30);
    session.currentFrame = 4;
    session.status = { state: "broken", from_frame: 0, broken_at: 17 };
    expect(session.reviewTarget()).toBe(17);
    session.status = { state: "done", from_frame: 0 };
    expect(session.reviewTarget()).toBe(4);
  });
});
