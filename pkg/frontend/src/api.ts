/**
 * Typed client for the workbench HTTP API.
 *
 * URL construction is kept separate from transport so tests can verify
 * the exact requests without a server, and so the scheduler can treat
 * URLs as cache keys.
 */

import type { ViewState } from "./state.js";

export interface SessionCreated {
  id: string;
  height: number;
  width: number;
}

export interface ConfidenceGrid {
  gh: number;
  gw: number;
  values: number[];
}

export interface Metrics {
  psnr: number | null; // null encodes infinite PSNR (identical images)
  ssim: number;
  mse: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

export function fusionQuery(state: ViewState): string {
  const q = new URLSearchParams({
    method: state.method,
    w: state.w.toFixed(2),
    guided: state.guided ? "true" : "false",
    threshold: state.threshold.toFixed(2),
  });
  return q.toString();
}

export function imageUrl(base: string, state: ViewState, kind: "fused" | "error"): string {
  return `${base}/api/sessions/${state.sessionId}/${kind}?${fusionQuery(state)}`;
}

export function artifactUrl(
  base: string,
  sessionId: string,
  kind: "noisy" | "reliable" | "dnn" | "residual",
): string {
  return `${base}/api/sessions/${sessionId}/${kind}`;
}

export function metricsUrl(base: string, state: ViewState): string {
  return `${base}/api/sessions/${state.sessionId}/metrics?${fusionQuery(state)}`;
}

export function confidenceUrl(base: string, sessionId: string): string {
  return `${base}/api/sessions/${sessionId}/confidence`;
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body.detail) return body.detail;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${resp.status}`;
}

export class ApiClient {
  constructor(
    readonly base: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async ok(resp: Response): Promise<Response> {
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return resp;
  }

  async createSession(
    image: Blob,
    options: { clean?: Blob; noiseKind?: string; noiseSigma?: number; noiseSeed?: number } = {},
  ): Promise<SessionCreated> {
    const form = new FormData();
    form.append("image", image, "image.png");
    if (options.clean) form.append("clean", options.clean, "clean.png");
    if (options.noiseKind) {
      form.append("noise_kind", options.noiseKind);
      form.append("noise_sigma", String(options.noiseSigma ?? 25));
      form.append("noise_seed", String(options.noiseSeed ?? 0));
    }
    const resp = await this.fetchFn(`${this.base}/api/sessions`, {
      method: "POST",
      body: form,
    });
    return (await this.ok(resp)).json();
  }

  async fetchImage(url: string): Promise<Blob> {
    const resp = await this.fetchFn(url);
    return (await this.ok(resp)).blob();
  }

  async fetchConfidence(sessionId: string): Promise<ConfidenceGrid> {
    const resp = await this.fetchFn(confidenceUrl(this.base, sessionId));
    return (await this.ok(resp)).json();
  }

  async fetchMetrics(state: ViewState): Promise<Metrics> {
    const resp = await this.fetchFn(metricsUrl(this.base, state));
    return (await this.ok(resp)).json();
  }
}
