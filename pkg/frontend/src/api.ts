// HTTP client for the surrogate service.
//
// Small fields travel as JSON; past BINARY_THRESHOLD cells the client asks
// for raw little-endian f64 bodies instead, which keeps JSON parsing off
// the interaction path. Metadata then arrives in X- headers.

import type { FieldResult, InferQuery, Meta } from "./types.js";

export const BINARY_THRESHOLD = 10_000;

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

async function errorDetail(r: Response): Promise<string> {
  try {
    const body = (await r.json()) as { detail?: string };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the status line
  }
  return `${r.status} ${r.statusText}`;
}

export class ApiClient {
  private fieldSize = 0;

  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private get binary(): boolean {
    return this.fieldSize > BINARY_THRESHOLD;
  }

  async meta(): Promise<Meta> {
    const r = await this.fetchFn(`${this.baseUrl}/meta`);
    if (!r.ok) throw new ApiError(r.status, await errorDetail(r));
    const meta = (await r.json()) as Meta;
    this.fieldSize = meta.n;
    return meta;
  }

  async infer(query: InferQuery): Promise<FieldResult> {
    const r = await this.fetchFn(`${this.baseUrl}/infer`, {
      method: "POST",
      headers: this.binary
        ? { "Content-Type": "application/json", Accept: "application/octet-stream" }
        : { "Content-Type": "application/json" },
      body: JSON.stringify(query),
    });
    if (!r.ok) throw new ApiError(r.status, await errorDetail(r));
    if (this.binary) {
      // served little-endian; every platform a browser runs on matches
      return {
        field: new Float64Array(await r.arrayBuffer()),
        latencyUs: Number(r.headers.get("X-Latency-Us") ?? 0),
        extrapolated: r.headers.get("X-Extrapolated") === "1",
      };
    }
    const j = (await r.json()) as { field: number[]; latency_us: number; extrapolated: boolean };
    return {
      field: Float64Array.from(j.field),
      latencyUs: j.latency_us,
      extrapolated: j.extrapolated,
    };
  }

  async inferBatch(queries: InferQuery[]): Promise<FieldResult[]> {
    const r = await this.fetchFn(`${this.baseUrl}/infer_batch`, {
      method: "POST",
      headers: this.binary
        ? { "Content-Type": "application/json", Accept: "application/octet-stream" }
        : { "Content-Type": "application/json" },
      body: JSON.stringify(queries),
    });
    if (!r.ok) throw new ApiError(r.status, await errorDetail(r));
    if (this.binary) {
      const all = new Float64Array(await r.arrayBuffer());
      const count = Number(r.headers.get("X-Batch-Count") ?? queries.length);
      const flags = (r.headers.get("X-Extrapolated") ?? "").split(",");
      const per = count > 0 ? all.length / count : 0;
      const out: FieldResult[] = [];
      for (let i = 0; i < count; i++) {
        out.push({
          field: all.subarray(i * per, (i + 1) * per),
          latencyUs: 0,
          extrapolated: flags[i] === "1",
        });
      }
      return out;
    }
    const j = (await r.json()) as { field: number[]; latency_us: number; extrapolated: boolean }[];
    return j.map((item) => ({
      field: Float64Array.from(item.field),
      latencyUs: item.latency_us,
      extrapolated: item.extrapolated,
    }));
  }

  async mode(k: number): Promise<Float64Array> {
    const r = await this.fetchFn(`${this.baseUrl}/mode/${k}`, {
      headers: this.binary ? { Accept: "application/octet-stream" } : {},
    });
    if (!r.ok) throw new ApiError(r.status, await errorDetail(r));
    if (this.binary) return new Float64Array(await r.arrayBuffer());
    const j = (await r.json()) as { mode: number[] };
    return Float64Array.from(j.mode);
  }
}
