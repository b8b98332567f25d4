/** Typed client for the dlsp HTTP API. The UI computes nothing itself:
 * every number on screen came out of one of these calls. */

import { b64ToBytes, bytesToB64 } from "./base64.js";
import { Grid } from "./grid.js";

export interface GridPayload {
  height: number;
  width: number;
  grid_b64: string;
}

export interface Prediction {
  class: number;
  probs: number[];
}

export interface SaliencyMap {
  height: number;
  width: number;
  data: Uint8Array;
}

export interface OracleReport {
  jsc: number;
  proxy: number;
  eta_diss: number;
  eta_transport: number;
  class: number;
}

export interface DesignJobView {
  id: string;
  status: "running" | "done" | "failed";
  error: string | null;
  iteration: number;
  fitness_history: [number, number, number][];
  best_fitness?: number;
  P?: GridPayload;
  best?: GridPayload;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export function gridToPayload(g: Grid): GridPayload {
  return { height: g.height, width: g.width, grid_b64: bytesToB64(g.data) };
}

export function payloadToGrid(p: GridPayload): Grid {
  const data = b64ToBytes(p.grid_b64);
  if (data.length !== p.height * p.width) {
    throw new Error(`payload has ${data.length} bytes, want ${p.height * p.width}`);
  }
  return { height: p.height, width: p.width, data };
}

export class ApiClient {
  constructor(
    private readonly base = "",
    private readonly fetchFn: FetchLike = (url, init) => globalThis.fetch(url, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new Error(`${path} failed: ${res.status} ${await safeDetail(res)}`);
    return (await res.json()) as T;
  }

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.base + path);
    if (!res.ok) throw new Error(`${path} failed: ${res.status} ${await safeDetail(res)}`);
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string; model_digest: string }> {
    return this.get("/api/health");
  }

  predict(grid: Grid): Promise<Prediction> {
    return this.post<Prediction>("/api/predict", gridToPayload(grid));
  }

  async saliency(grid: Grid, target?: number): Promise<SaliencyMap> {
    const body = { ...gridToPayload(grid), ...(target === undefined ? {} : { target }) };
    const res = await this.post<{ map_b64: string; height: number; width: number }>(
      "/api/saliency",
      body,
    );
    return { height: res.height, width: res.width, data: b64ToBytes(res.map_b64) };
  }

  oracle(grid: Grid): Promise<OracleReport> {
    return this.post<OracleReport>("/api/oracle", gridToPayload(grid));
  }

  startDesign(init: GridPayload | "bilayer" | "uniform", params: Record<string, number>): Promise<{ job_id: string }> {
    return this.post<{ job_id: string }>("/api/design/start", { init, params });
  }

  designStatus(id: string): Promise<DesignJobView> {
    return this.get<DesignJobView>(`/api/design/${id}`);
  }

  async cancelDesign(id: string): Promise<void> {
    const res = await this.fetchFn(`${this.base}/api/design/${id}`, { method: "DELETE" });
    if (!res.ok) throw new Error(`cancel failed: ${res.status}`);
  }
}

async function safeDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: string };
    return body.detail ?? "";
  } catch {
    return "";
  }
}
