/**
 * Coordinates the four views: a group selection triggers one set of API
 * calls whose results feed both the matrix band overlay and the sample
 * grid, so the two can never disagree (single source of truth: the API).
 * Stale responses are discarded via request generations.
 */

import type { ApiClient } from './api.js';
import { RequestGate, Store } from './state.js';
import { computeSampleGrid, SampleGridModel } from './samples.js';
import type { Band, SamplesPayload } from './types.js';

export interface BandOverlay {
  band: Band;
  sampleIds: string[];
}

export interface GroupSelectionResult {
  groupId: number;
  /** vertical/horizontal band overlays for the matrix view */
  overlays: BandOverlay[];
  /** grid model for the sample viewer, fed from the same payloads */
  grids: Record<Band, SampleGridModel>;
}

export class Coordinator {
  private gate = new RequestGate();

  constructor(readonly api: ApiClient, readonly store: Store) {}

  /**
   * Handle a hierarchy/matrix group click: fetch the TP/FP/FN bands once
   * and derive every dependent view model from those payloads.
   */
  async selectGroup(groupId: number): Promise<GroupSelectionResult | null> {
    const { datasetId, setId } = this.store.get();
    if (!datasetId || !setId) throw new Error('no dataset/set loaded');
    const token = this.gate.begin();
    const bands: Band[] = ['tp', 'fp', 'fn'];
    const payloads = await Promise.all(
      bands.map((band) => this.api.bandSamples(datasetId, setId, groupId, band)));
    if (!this.gate.accept(token)) return null; // a newer selection won
    this.store.update({ selectedGroup: groupId });
    const byBand = new Map<Band, SamplesPayload>(
      bands.map((band, i) => [band, payloads[i]]));
    const overlays = bands.map((band) => ({
      band,
      sampleIds: (byBand.get(band)!.samples ?? []).map((s) => s.sample_id),
    }));
    const grids = Object.fromEntries(
      bands.map((band) => [band, computeSampleGrid(byBand.get(band)!)]),
    ) as Record<Band, SampleGridModel>;
    return { groupId, overlays, grids };
  }
}
