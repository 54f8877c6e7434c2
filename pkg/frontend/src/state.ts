/**
 * View state and its URL round trip.
 *
 * Every field the user can steer lives here so deep links reproduce the
 * exact view. Parsing is lenient (bad values fall back to defaults and
 * are clamped); serialization omits fields at their default to keep
 * URLs short.
 */

export type FusionMethod = "dct" | "dwt" | "dwt_corr";
export type VisMode = "fused" | "reliable" | "dnn" | "confidence_overlay" | "error_vs_gt";
export type PipelineMode = "denoise" | "super_resolution";

export interface ViewState {
  sessionId: string | null;
  method: FusionMethod;
  w: number;
  guided: boolean;
  threshold: number;
  zoom: number;
  panX: number;
  panY: number;
  vis: VisMode;
  mode: PipelineMode;
}

export const W_STEP = 0.01;
export const ZOOM_LEVELS = [1, 2, 4, 8];

export function defaultState(): ViewState {
  return {
    sessionId: null,
    method: "dct",
    w: 0.5,
    guided: false,
    threshold: 0.8,
    zoom: 1,
    panX: 0,
    panY: 0,
    vis: "fused",
    mode: "denoise",
  };
}

const METHODS: FusionMethod[] = ["dct", "dwt", "dwt_corr"];
const VIS_MODES: VisMode[] = ["fused", "reliable", "dnn", "confidence_overlay", "error_vs_gt"];
const PIPELINE_MODES: PipelineMode[] = ["denoise", "super_resolution"];

export function clamp01(x: number): number {
  return Math.min(1, Math.max(0, x));
}

/** Snap a slider value onto the 0.01 grid inside [0, 1]. */
export function snapWeight(w: number): number {
  return Math.round(clamp01(w) / W_STEP) * W_STEP;
}

export function toQuery(state: ViewState): string {
  const d = defaultState();
  const q = new URLSearchParams();
  if (state.sessionId) q.set("s", state.sessionId);
  if (state.method !== d.method) q.set("method", state.method);
  if (state.w !== d.w) q.set("w", state.w.toFixed(2));
  if (state.guided !== d.guided) q.set("guided", "1");
  if (state.threshold !== d.threshold) q.set("t", state.threshold.toFixed(2));
  if (state.zoom !== d.zoom) q.set("z", String(state.zoom));
  if (state.panX !== d.panX) q.set("px", String(Math.round(state.panX)));
  if (state.panY !== d.panY) q.set("py", String(Math.round(state.panY)));
  if (state.vis !== d.vis) q.set("vis", state.vis);
  if (state.mode !== d.mode) q.set("mode", state.mode);
  return q.toString();
}

function pickEnum<T extends string>(value: string | null, allowed: T[], fallback: T): T {
  return allowed.includes(value as T) ? (value as T) : fallback;
}

function pickNumber(value: string | null, fallback: number): number {
  if (value === null) return fallback;
  const n = Number(value);
  return Number.isFinite(n) ? n : fallback;
}

export function fromQuery(query: string): ViewState {
  const q = new URLSearchParams(query);
  const d = defaultState();
  const zoom = pickNumber(q.get("z"), d.zoom);
  return {
    sessionId: q.get("s"),
    method: pickEnum(q.get("method"), METHODS, d.method),
    w: snapWeight(pickNumber(q.get("w"), d.w)),
    guided: q.get("guided") === "1",
    threshold: clamp01(pickNumber(q.get("t"), d.threshold)),
    zoom: ZOOM_LEVELS.includes(zoom) ? zoom : d.zoom,
    panX: pickNumber(q.get("px"), d.panX),
    panY: pickNumber(q.get("py"), d.panY),
    vis: pickEnum(q.get("vis"), VIS_MODES, d.vis),
    mode: pickEnum(q.get("mode"), PIPELINE_MODES, d.mode),
  };
}

/**
 * Visualization modes valid for a session; the error view needs ground
 * truth and the overlay needs a confidence model.
 */
export function availableVisModes(hasGroundTruth: boolean, hasConfidence: boolean): VisMode[] {
  return VIS_MODES.filter((m) => {
    if (m === "error_vs_gt") return hasGroundTruth;
    if (m === "confidence_overlay") return hasConfidence;
    return true;
  });
}
