/**
 * Canvas renderer: base image at integer zoom/pan plus the confidence
 * overlay. Rendering is nearest-neighbor (no smoothing) so block
 * boundaries and fusion artifacts stay inspectable at high zoom.
 */

import type { ConfidenceGrid } from "./api.js";
import { cellColor, cellRect, gridValue } from "./overlay.js";
import type { ViewState } from "./state.js";

export class CanvasView {
  private ctx: CanvasRenderingContext2D;
  private image: ImageBitmap | null = null;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
  }

  async setImageBlob(blob: Blob): Promise<void> {
    this.image = await createImageBitmap(blob);
  }

  render(state: ViewState, overlay: ConfidenceGrid | null): void {
    const { ctx, canvas } = this;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (!this.image) return;
    ctx.imageSmoothingEnabled = false; // nearest-neighbor zoom
    ctx.drawImage(
      this.image,
      state.panX,
      state.panY,
      this.image.width * state.zoom,
      this.image.height * state.zoom,
    );
    if (overlay && state.vis === "confidence_overlay") {
      this.renderOverlay(state, overlay);
    }
  }

  private renderOverlay(state: ViewState, grid: ConfidenceGrid): void {
    const { ctx } = this;
    for (let row = 0; row < grid.gh; row++) {
      for (let col = 0; col < grid.gw; col++) {
        const { r, g, b, a } = cellColor(gridValue(grid, row, col), state.threshold);
        if (a <= 0) continue;
        const rect = cellRect(row, col, state.zoom, state.panX, state.panY);
        ctx.fillStyle = `rgba(${r}, ${g}, ${b}, ${a})`;
        ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
      }
    }
  }
}

/** Dismissible error banner. */
export function showBanner(container: HTMLElement, message: string): void {
  const banner = document.createElement("div");
  banner.className = "banner";
  banner.textContent = message;
  const close = document.createElement("button");
  close.textContent = "×";
  close.addEventListener("click", () => banner.remove());
  banner.appendChild(close);
  container.appendChild(banner);
}
