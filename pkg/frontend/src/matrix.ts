/**
 * Confusion-matrix scene computation and canvas rendering.
 *
 * The scene is a pure function of (payload, options): each non-zero cell
 * becomes a core rect plus, with the halo enabled, a 3x3 periphery at 30%
 * opacity drawn underneath so isolated single-pixel cells stay visible at
 * full 1000x1000 scale. Partition boundaries become box outlines.
 */

import { matrixColor } from './color.js';
import type { ConfusionPayload } from './types.js';

export const HALO_FOOTPRINT = 3;
export const HALO_ALPHA = 0.3;

export interface MatrixOptions {
  cellSize: number; // pixels per class
  halo: boolean;
  logScale: boolean;
}

export interface CellSprite {
  row: number;
  col: number;
  value: number;
  color: string;
  /** side length in cells of the painted footprint (1, or 3 with halo) */
  footprint: number;
  haloAlpha: number | null;
}

export interface BlockBox {
  start: number; // first class position
  end: number; // one past the last position
}

export interface MatrixScene {
  n: number;
  cellSize: number;
  maxValue: number;
  cells: CellSprite[];
  boxes: BlockBox[];
}

export function computeMatrixScene(payload: ConfusionPayload,
                                   options: MatrixOptions): MatrixScene {
  const n = payload.order.length;
  const maxValue = payload.cells.reduce((m, [, , v]) => Math.max(m, v), 0);
  const cells: CellSprite[] = payload.cells.map(([row, col, value]) => ({
    row,
    col,
    value,
    color: matrixColor(value, maxValue, options.logScale),
    footprint: options.halo ? HALO_FOOTPRINT : 1,
    haloAlpha: options.halo ? HALO_ALPHA : null,
  }));
  const boxes: BlockBox[] = [];
  if (payload.partition) {
    const edges = [0, ...payload.partition.boundaries, n];
    for (let i = 0; i + 1 < edges.length; i++) {
      boxes.push({ start: edges[i], end: edges[i + 1] });
    }
  }
  return { n, cellSize: options.cellSize, maxValue, cells, boxes };
}

export function drawMatrix(ctx: CanvasRenderingContext2D, scene: MatrixScene): void {
  const s = scene.cellSize;
  ctx.clearRect(0, 0, scene.n * s, scene.n * s);
  // halo pass first so core pixels stay fully opaque on top
  if (scene.cells.some((c) => c.haloAlpha !== null)) {
    for (const cell of scene.cells) {
      if (cell.haloAlpha === null) continue;
      const pad = ((cell.footprint - 1) / 2) * s;
      ctx.globalAlpha = cell.haloAlpha;
      ctx.fillStyle = cell.color;
      ctx.fillRect(cell.col * s - pad, cell.row * s - pad,
                   cell.footprint * s, cell.footprint * s);
    }
    ctx.globalAlpha = 1;
  }
  for (const cell of scene.cells) {
    ctx.fillStyle = cell.color;
    ctx.fillRect(cell.col * s, cell.row * s, s, s);
  }
  ctx.strokeStyle = '#333';
  ctx.lineWidth = 1;
  for (const box of scene.boxes) {
    const x = box.start * s;
    const size = (box.end - box.start) * s;
    ctx.strokeRect(x + 0.5, x + 0.5, size - 1, size - 1);
  }
}

/** Map a drag rectangle in pixels onto class-position ranges. */
export function dragToCellRange(scene: MatrixScene, x0: number, y0: number,
                                x1: number, y1: number): {
  rows: [number, number];
  cols: [number, number];
} {
  const s = scene.cellSize;
  const clamp = (v: number) => Math.max(0, Math.min(scene.n - 1, Math.floor(v / s)));
  return {
    rows: [clamp(Math.min(y0, y1)), clamp(Math.max(y0, y1))],
    cols: [clamp(Math.min(x0, x1)), clamp(Math.max(x0, x1))],
  };
}

/** Which b x b block region a click lands in, if a partition is shown. */
export function clickToBlockRegion(scene: MatrixScene, x: number, y: number):
    { rowBlock: number; colBlock: number } | null {
  if (!scene.boxes.length) return null;
  const pos = (v: number) => Math.floor(v / scene.cellSize);
  const find = (p: number) => scene.boxes.findIndex((b) => p >= b.start && p < b.end);
  const rowBlock = find(pos(y));
  const colBlock = find(pos(x));
  if (rowBlock < 0 || colBlock < 0) return null;
  return { rowBlock, colBlock };
}
