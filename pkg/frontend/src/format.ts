/** Small display formatters shared by the metrics legend. */

import type { Metrics } from "./api.js";

/** PSNR label; the service sends null for infinite PSNR. */
export function formatPsnr(psnr: number | null): string {
  if (psnr === null) return "∞ dB";
  return `${psnr.toFixed(2)} dB`;
}

export function formatMetrics(m: Metrics): string {
  return `PSNR ${formatPsnr(m.psnr)} · SSIM ${m.ssim.toFixed(4)} · MSE ${m.mse.toExponential(3)}`;
}
