/**
 * Canvas app wiring: frame display, box drawing, scrubbing, propagation.
 * All state logic lives in session.ts / draw.ts; this file is DOM glue.
 */
import { ApiClient } from "./api.js";
import { finishBox, startEdge, type EdgeDraft } from "./draw.js";
import { formatThetaDeg, obbAngle, orientationArrow } from "./geometry.js";
import { AnnotationSession } from "./session.js";
import type { ObbLabel } from "./types.js";

const api = new ApiClient(
  (window as { LOOPKIT_API?: string }).LOOPKIT_API ?? "http://127.0.0.1:8000"
);

const canvas = document.getElementById("frame") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const frameEl = document.getElementById("frame-no")!;
const messageEl = document.getElementById("message")!;

let session: AnnotationSession | null = null;
let classId = 0;
let draft: EdgeDraft | null = null;
let pendingEdge: EdgeDraft | null = null;
const imageCache = new Map<number, HTMLImageElement>();

function show(message: string): void {
  messageEl.textContent = message;
}

function loadImage(frame: number): Promise<HTMLImageElement> {
  const cached = imageCache.get(frame);
  if (cached) return Promise.resolve(cached);
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => {
      imageCache.set(frame, img);
      resolve(img);
    };
    img.onerror = reject;
    img.src = api.frameUrl(session!.sequenceId, frame);
  });
}

function drawLabel(label: ObbLabel, color: string): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  const v = label.vertices;
  ctx.moveTo(v[0][0], v[0][1]);
  for (const [x, y] of [...v.slice(1), v[0]]) ctx.lineTo(x, y);
  ctx.stroke();
  // red arrow along the longest axis marks the orientation
  const [from, to] = orientationArrow(label);
  ctx.strokeStyle = "#e33";
  ctx.beginPath();
  ctx.moveTo(from.x, from.y);
  ctx.lineTo(to.x, to.y);
  ctx.stroke();
  ctx.fillStyle = color;
  ctx.font = "12px sans-serif";
  ctx.fillText(
    `${label.class_id} @ ${formatThetaDeg(obbAngle(v))}`,
    v[0][0] + 3,
    v[0][1] - 3
  );
}

async function render(): Promise<void> {
  if (!session) return;
  const img = await loadImage(session.currentFrame);
  canvas.width = img.width;
  canvas.height = img.height;
  ctx.drawImage(img, 0, 0);
  for (const label of session.displayLabels()) drawLabel(label, "#3c3");
  frameEl.textContent = `frame ${session.currentFrame + 1}/${session.numFrames}`;
  statusEl.textContent = session.status.state;
  for (const i of session.prefetchWindow()) void loadImage(i);
}

canvas.addEventListener("mousedown", (ev) => {
  const p = { x: ev.offsetX, y: ev.offsetY };
  if (pendingEdge) return;
  draft = { p0: p, p1: p };
});

canvas.addEventListener("mouseup", (ev) => {
  const p = { x: ev.offsetX, y: ev.offsetY };
  if (pendingEdge && session) {
    try {
      session.addLabel(finishBox(pendingEdge, p, classId));
      void render();
    } catch (err) {
      show(String(err));
    }
    pendingEdge = null;
    return;
  }
  if (!draft) return;
  try {
    pendingEdge = startEdge(draft.p0, p);
    show("now drag to set the box height");
  } catch (err) {
    show(String(err));
  }
  draft = null;
});

document.addEventListener("keydown", async (ev) => {
  if (!session) return;
  if (ev.key === "ArrowRight") await session.scrub(1);
  else if (ev.key === "ArrowLeft") await session.scrub(-1);
  else if (ev.key >= "0" && ev.key <= "9") {
    classId = Number(ev.key);
    show(`class ${classId} selected`);
    return;
  } else if (ev.key === "s") await session.save();
  else if (ev.key === "p") {
    await session.saveAndPropagate();
    show("propagating…");
    await session.waitForPropagation();
    await session.goTo(session.reviewTarget());
  } else return;
  await render();
});

async function boot(): Promise<void> {
  const sequences = await api.listSequences();
  if (!sequences.length) {
    show("no sequences on the server");
    return;
  }
  const seq = sequences[0];
  session = new AnnotationSession(api, seq.id, seq.num_frames);
  await session.goTo(0);
  await render();
  show("drag an edge, then its extent; 0-9 class, s save, p propagate");
}

void boot();
