/**
 * Client-side confidence overlay.
 *
 * The grid arrives once as JSON; recoloring under a new threshold is
 * pure local math so threshold exploration never refetches. Cells above
 * the threshold tint green, cells below tint purple (the predicted-
 * hallucination highlight) and a cell exactly at the threshold is fully
 * transparent.
 */

import type { ConfidenceGrid } from "./api.js";

export const CELL = 8; // confidence granularity in image pixels

export interface Rgba {
  r: number;
  g: number;
  b: number;
  a: number; // 0..1
}

export const MAX_ALPHA = 0.55;

/** Color for one confidence value at the given threshold. */
export function cellColor(c: number, threshold: number): Rgba {
  if (c > threshold) {
    const span = Math.max(1 - threshold, 1e-9);
    const k = Math.min((c - threshold) / span, 1);
    return { r: 0, g: 200, b: 70, a: MAX_ALPHA * k };
  }
  const span = Math.max(threshold, 1e-9);
  const k = Math.min((threshold - c) / span, 1);
  return { r: 170, g: 0, b: 200, a: MAX_ALPHA * k };
}

export interface CellRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/**
 * Screen-space rectangle of grid cell (row, col).
 *
 * Cell (i, j) covers image pixels rows 8i..8i+7 and columns 8j..8j+7;
 * zoom and pan are applied after that mapping so the overlay stays
 * glued to the underlying pixels at any view transform.
 */
export function cellRect(row: number, col: number, zoom: number, panX: number, panY: number): CellRect {
  return {
    x: col * CELL * zoom + panX,
    y: row * CELL * zoom + panY,
    w: CELL * zoom,
    h: CELL * zoom,
  };
}

/** Grid value lookup with row-major JSON layout. */
export function gridValue(grid: ConfidenceGrid, row: number, col: number): number {
  if (row < 0 || row >= grid.gh || col < 0 || col >= grid.gw) {
    throw new RangeError(`cell (${row}, ${col}) outside ${grid.gh}x${grid.gw} grid`);
  }
  return grid.values[row * grid.gw + col];
}

/** The grid cell containing image pixel (x, y), or null outside the grid. */
export function cellAtPixel(
  grid: ConfidenceGrid,
  x: number,
  y: number,
): { row: number; col: number } | null {
  const row = Math.floor(y / CELL);
  const col = Math.floor(x / CELL);
  if (row < 0 || row >= grid.gh || col < 0 || col >= grid.gw) return null;
  return { row, col };
}
