/**
 * Response-map scene: one column per neuron with its channels linearized
 * into 1px-wide vertical lines, rows following the hierarchy class order.
 * Cells at or above the threshold saturate to yellow; headers carry the
 * relevance tint. Column order is taken from the payload as-is (the
 * service already applies relevance ordering when requested).
 */

import { relevanceColor, responseColor } from './color.js';
import type { ResponseMapPayload } from './types.js';

export interface ResponseCell {
  row: number;
  channel: number;
  value: number;
  saturated: boolean;
  color: string;
}

export interface ResponseColumn {
  neuronId: number;
  x: number;
  width: number;
  relevance: number | 'inf' | null;
  headerColor: string;
  cells: ResponseCell[];
}

export interface ResponseScene {
  nRows: number;
  rowHeight: number;
  columnGap: number;
  threshold: number | null;
  columns: ResponseColumn[];
  /** rows excluded from normalization (classes without samples) */
  undefinedRows: number[];
}

export interface ResponseSceneOptions {
  rowHeight: number;
  columnGap: number;
}

export function computeResponseScene(payload: ResponseMapPayload,
                                     options: ResponseSceneOptions): ResponseScene {
  const threshold = payload.threshold;
  const defined = payload.defined;
  let peak = 0;
  for (const neuron of payload.neurons) {
    neuron.profile.forEach((row, r) => {
      if (!defined[r]) return;
      for (const v of row) peak = Math.max(peak, v);
    });
  }
  const maxFinite = payload.neurons.reduce(
    (m, n) => typeof n.relevance === 'number' ? Math.max(m, n.relevance) : m, 0);

  const columns: ResponseColumn[] = [];
  let x = 0;
  for (const neuron of payload.neurons) {
    const nChannels = neuron.profile[0]?.length ?? 0;
    const saturatedSet = new Set(
      (neuron.saturated ?? []).map(([r, c]) => r * nChannels + c));
    const cells: ResponseCell[] = [];
    neuron.profile.forEach((row, r) => {
      if (!defined[r]) return;
      row.forEach((value, c) => {
        const saturated = threshold !== null
          ? saturatedSet.has(r * nChannels + c)
          : false;
        cells.push({
          row: r,
          channel: c,
          value,
          saturated,
          color: threshold !== null
            ? responseColor(value, threshold, peak)
            : responseColor(value, Number.POSITIVE_INFINITY, peak || 1),
        });
      });
    });
    columns.push({
      neuronId: neuron.neuron_id,
      x,
      width: nChannels,
      relevance: neuron.relevance,
      headerColor: neuron.relevance === null
        ? '#eeeeee'
        : relevanceColor(neuron.relevance, maxFinite),
      cells,
    });
    x += nChannels + options.columnGap;
  }
  return {
    nRows: payload.class_order.length,
    rowHeight: options.rowHeight,
    columnGap: options.columnGap,
    threshold,
    columns,
    undefinedRows: defined.flatMap((d, i) => (d ? [] : [i])),
  };
}

export function drawResponseMap(ctx: CanvasRenderingContext2D,
                                scene: ResponseScene): void {
  const h = scene.rowHeight;
  const width = scene.columns.length
    ? scene.columns[scene.columns.length - 1].x + scene.columns[scene.columns.length - 1].width
    : 0;
  ctx.clearRect(0, 0, width, scene.nRows * h);
  for (const column of scene.columns) {
    for (const cell of column.cells) {
      ctx.fillStyle = cell.color;
      ctx.fillRect(column.x + cell.channel, cell.row * h, 1, h);
    }
  }
}

/** Column order as neuron ids, e.g. to verify against the relevance API. */
export function columnOrder(scene: ResponseScene): number[] {
  return scene.columns.map((c) => c.neuronId);
}
