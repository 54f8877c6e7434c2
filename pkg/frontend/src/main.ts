/**
 * Application wiring: controls on the left, canvas on the right.
 *
 * All pixels shown come from service responses; the only client-side
 * image math is the confidence recolorization and nearest-neighbor
 * zoom. View state round-trips through the URL hash for deep links.
 */

import { ApiClient, artifactUrl, imageUrl, type ConfidenceGrid } from "./api.js";
import { formatMetrics } from "./format.js";
import { RequestScheduler } from "./scheduler.js";
import {
  availableVisModes,
  defaultState,
  fromQuery,
  snapWeight,
  toQuery,
  ZOOM_LEVELS,
  type ViewState,
  type VisMode,
} from "./state.js";
import { CanvasView, showBanner } from "./view.js";

const api = new ApiClient("");
let state: ViewState = fromQuery(location.hash.slice(1));
let overlay: ConfidenceGrid | null = null;
let hasGroundTruth = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("viewport");
const view = new CanvasView(canvas);
const banners = el<HTMLDivElement>("banners");
const metricsLabel = el<HTMLSpanElement>("metrics");

function pushUrl(): void {
  history.replaceState(null, "", `#${toQuery(state)}`);
}

function currentImageUrl(s: ViewState): string {
  if (!s.sessionId) throw new Error("no session");
  switch (s.vis) {
    case "reliable":
    case "dnn":
      return artifactUrl("", s.sessionId, s.vis);
    case "error_vs_gt":
      return imageUrl("", s, "error");
    default:
      return imageUrl("", s, "fused");
  }
}

const imageScheduler = new RequestScheduler<ViewState, Blob>(
  (s) => api.fetchImage(currentImageUrl(s)),
  (blob) => {
    void view.setImageBlob(blob).then(() => view.render(state, overlay));
  },
  (err) => showBanner(banners, String(err)),
);

const metricsScheduler = new RequestScheduler<ViewState, string>(
  (s) => api.fetchMetrics(s).then(formatMetrics),
  (text) => {
    metricsLabel.textContent = text;
  },
  () => {
    metricsLabel.textContent = "";
  },
  200,
);

function refresh(flush = false): void {
  pushUrl();
  if (!state.sessionId) return;
  if (flush) imageScheduler.flush(state);
  else imageScheduler.schedule(state);
  if (hasGroundTruth) metricsScheduler.schedule(state);
}

async function loadConfidence(): Promise<void> {
  overlay = null;
  if (!state.sessionId) return;
  try {
    overlay = await api.fetchConfidence(state.sessionId);
  } catch {
    overlay = null; // confidence model unavailable; overlay mode hidden
  }
  rebuildVisModes();
}

function rebuildVisModes(): void {
  const select = el<HTMLSelectElement>("vis");
  const modes = availableVisModes(hasGroundTruth, overlay !== null);
  select.innerHTML = "";
  for (const m of modes) {
    const option = document.createElement("option");
    option.value = m;
    option.textContent = m.replace(/_/g, " ");
    select.appendChild(option);
  }
  if (!modes.includes(state.vis)) state.vis = "fused";
  select.value = state.vis;
}

function bindControls(): void {
  const wSlider = el<HTMLInputElement>("w");
  wSlider.value = String(state.w);
  wSlider.addEventListener("input", () => {
    state = { ...state, w: snapWeight(Number(wSlider.value)) };
    refresh();
  });
  wSlider.addEventListener("change", () => refresh(true));

  const tSlider = el<HTMLInputElement>("threshold");
  tSlider.value = String(state.threshold);
  tSlider.addEventListener("input", () => {
    state = { ...state, threshold: Number(tSlider.value) };
    pushUrl();
    view.render(state, overlay); // client-side recolor, no refetch
  });

  const method = el<HTMLSelectElement>("method");
  method.value = state.method;
  method.addEventListener("change", () => {
    state = { ...state, method: method.value as ViewState["method"] };
    refresh(true);
  });

  const guided = el<HTMLInputElement>("guided");
  guided.checked = state.guided;
  guided.addEventListener("change", () => {
    state = { ...state, guided: guided.checked };
    refresh(true);
  });

  const vis = el<HTMLSelectElement>("vis");
  vis.addEventListener("change", () => {
    state = { ...state, vis: vis.value as VisMode }; // zoom/pan preserved
    refresh(true);
  });

  const zoom = el<HTMLSelectElement>("zoom");
  zoom.value = String(state.zoom);
  zoom.addEventListener("change", () => {
    state = { ...state, zoom: Number(zoom.value) };
    pushUrl();
    view.render(state, overlay);
    refresh(true);
  });
  for (const z of ZOOM_LEVELS) {
    const option = document.createElement("option");
    option.value = String(z);
    option.textContent = `${z}×`;
    zoom.appendChild(option);
  }
  zoom.value = String(state.zoom);

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    state = { ...state, panX: state.panX + e.clientX - lastX, panY: state.panY + e.clientY - lastY };
    lastX = e.clientX;
    lastY = e.clientY;
    pushUrl();
    view.render(state, overlay);
  });
  canvas.addEventListener("pointerup", () => {
    dragging = false;
  });

  const upload = el<HTMLInputElement>("upload");
  upload.addEventListener("change", async () => {
    const file = upload.files?.[0];
    if (!file) return;
    const sigma = Number(el<HTMLInputElement>("sigma").value);
    try {
      const created = await api.createSession(file, {
        noiseKind: sigma > 0 ? "gaussian" : undefined,
        noiseSigma: sigma,
      });
      hasGroundTruth = sigma > 0; // the upload doubles as ground truth
      state = { ...defaultState(), sessionId: created.id };
      await loadConfidence();
      refresh(true);
    } catch (err) {
      showBanner(banners, String(err));
    }
  });
}

bindControls();
rebuildVisModes();
if (state.sessionId) {
  void loadConfidence().then(() => refresh(true));
}
