/**
 * REST client for the annotation service. This is the UI's only backend:
 * every label shown on screen comes from these endpoints, never from
 * client-side transform math.
 */
import type {
  Annotation,
  ObbLabel,
  PropagationStatus,
  SequenceInfo,
  SequenceManifest,
} from "./types.js";

/** Annotation write rejected because someone saved a newer version. */
export class StaleVersionError extends Error {
  constructor(public readonly currentVersion: number) {
    super(`stale annotation version; server is at ${currentVersion}`);
  }
}

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
  }
}

async function expectOk(res: Response): Promise<Response> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(res.status, detail);
  }
  return res;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async listSequences(): Promise<SequenceInfo[]> {
    const res = await expectOk(await this.fetchImpl(this.url("/sequences")));
    return (await res.json()).sequences;
  }

  async createSequence(id: string, manifest: SequenceManifest): Promise<void> {
    await expectOk(
      await this.fetchImpl(this.url("/sequences"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ id, manifest }),
      })
    );
  }

  /** URL for an <img> tag; frames are fetched lazily by the browser. */
  frameUrl(seqId: string, index: number): string {
    return this.url(`/sequences/${seqId}/frames/${index}`);
  }

  async getAnnotation(seqId: string, index: number): Promise<Annotation> {
    const res = await expectOk(
      await this.fetchImpl(this.url(`/sequences/${seqId}/annotations/${index}`))
    );
    return res.json();
  }

  /**
   * Save an annotation with optimistic concurrency: throws
   * StaleVersionError carrying the server's current version on a 409.
   */
  async saveAnnotation(
    seqId: string,
    index: number,
    version: number,
    labels: ObbLabel[]
  ): Promise<Annotation> {
    const res = await this.fetchImpl(
      this.url(`/sequences/${seqId}/annotations/${index}`),
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ version, labels }),
      }
    );
    if (res.status === 409) {
      const body = await res.json();
      throw new StaleVersionError(body.detail.version);
    }
    await expectOk(res);
    return res.json();
  }

  async propagate(seqId: string, fromFrame: number): Promise<void> {
    await expectOk(
      await this.fetchImpl(this.url(`/sequences/${seqId}/propagate`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ from_frame: fromFrame }),
      })
    );
  }

  async getStatus(seqId: string): Promise<PropagationStatus> {
    const res = await expectOk(
      await this.fetchImpl(this.url(`/sequences/${seqId}/status`))
    );
    return res.json();
  }

  /** Poll until the propagation job reaches a terminal state. */
  async waitForCompletion(
    seqId: string,
    { intervalMs = 200, timeoutMs = 120_000 } = {}
  ): Promise<PropagationStatus> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const status = await this.getStatus(seqId);
      if (
        status.state === "done" ||
        status.state === "broken" ||
        status.state === "error"
      ) {
        return status;
      }
      if (Date.now() > deadline) {
        throw new ApiError(0, `propagation timed out in state ${status.state}`);
      }
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }

  /** The exported labels file, verbatim (byte-for-byte what the CLI writes). */
  async fetchLabelsJsonl(seqId: string): Promise<string> {
    const res = await expectOk(
      await this.fetchImpl(this.url(`/sequences/${seqId}/labels.jsonl`))
    );
    return res.text();
  }
}
