/**
 * Sample viewer: thumbnail grid of a selection, either flat (one tile per
 * sample, tri-state border for top-1 / top-5 / otherwise) or grouped by
 * actual class (representative tile plus a count badge). Missing
 * thumbnails degrade to a labeled placeholder tile, never a failure.
 */

import { PLACEHOLDER_TILE } from './color.js';
import type { SamplesPayload } from './types.js';

export type BorderState = 'top1' | 'top5' | 'wrong';

export const BORDER_COLORS: Record<BorderState, string> = {
  top1: '#2e9e4f',
  top5: '#e0a800',
  wrong: '#d8434e',
};

export interface SampleTile {
  sampleId: string;
  label: string;
  tooltip: string;
  border: BorderState | null; // null for grouped representatives
  badge: number | null; // remaining-count badge for grouped tiles
}

export interface SampleGridModel {
  header: string;
  unknownCount: number;
  tiles: SampleTile[];
}

export function borderState(top1: boolean, top5: boolean): BorderState {
  if (top1) return 'top1';
  if (top5) return 'top5';
  return 'wrong';
}

export function computeSampleGrid(payload: SamplesPayload): SampleGridModel {
  const header = `${payload.provenance} — ${payload.count} samples`;
  if (payload.groups) {
    return {
      header,
      unknownCount: payload.unknown_count,
      tiles: payload.groups.map((g) => ({
        sampleId: g.representative,
        label: g.label,
        tooltip: `${g.label}: ${g.count} samples`,
        border: null,
        badge: g.count,
      })),
    };
  }
  return {
    header,
    unknownCount: payload.unknown_count,
    tiles: (payload.samples ?? []).map((s) => ({
      sampleId: s.sample_id,
      label: s.true_label,
      tooltip: `${s.sample_id}: ${s.true_label} -> ${s.predicted_label}`
        + ` (p=${s.pred_prob.toFixed(3)}`
        + (s.true_prob !== null ? `, true p=${s.true_prob.toFixed(3)})` : ')'),
      border: borderState(s.top1_correct, s.top5_correct),
      badge: null,
    })),
  };
}

export function renderSampleGrid(container: HTMLElement, model: SampleGridModel,
                                 thumbnailUrl: (sampleId: string) => string): void {
  container.textContent = '';
  const header = document.createElement('div');
  header.className = 'samples-header';
  header.textContent = model.unknownCount > 0
    ? `${model.header} (${model.unknownCount} unknown)`
    : model.header;
  container.appendChild(header);

  const grid = document.createElement('div');
  grid.className = 'samples-grid';
  for (const tile of model.tiles) {
    const cell = document.createElement('figure');
    cell.className = 'sample-tile';
    cell.title = tile.tooltip;
    if (tile.border) {
      cell.style.borderColor = BORDER_COLORS[tile.border];
    }
    const img = document.createElement('img');
    img.src = thumbnailUrl(tile.sampleId);
    img.alt = tile.label;
    img.addEventListener('error', () => {
      const placeholder = document.createElement('div');
      placeholder.className = 'sample-placeholder';
      placeholder.style.background = PLACEHOLDER_TILE;
      placeholder.textContent = tile.label;
      img.replaceWith(placeholder);
    });
    cell.appendChild(img);
    if (tile.badge !== null) {
      const badge = document.createElement('span');
      badge.className = 'sample-badge';
      badge.textContent = String(tile.badge);
      cell.appendChild(badge);
    }
    const caption = document.createElement('figcaption');
    caption.textContent = tile.label;
    cell.appendChild(caption);
    grid.appendChild(cell);
  }
  container.appendChild(grid);
}
