/** View state shared by all coordinated views, plus stale-response guards. */

import type { Band } from './types.js';

export type ActiveView = 'matrix' | 'responsemap';

export interface ViewState {
  datasetId: string | null;
  setId: string | null;
  layerId: string | null;
  activeView: ActiveView;
  selectedGroup: number | null;
  /** matrix encoding toggles */
  halo: boolean;
  logScale: boolean;
  blocks: number | null;
  minCell: number | null;
  topk: number | null;
  /** response map */
  threshold: number;
  orderByRelevance: boolean;
  /** comparison */
  compareVariant: string | null;
}

export const initialState: ViewState = {
  datasetId: null,
  setId: null,
  layerId: null,
  activeView: 'matrix',
  selectedGroup: null,
  halo: true,
  logScale: false,
  blocks: null,
  minCell: null,
  topk: null,
  threshold: 0,
  orderByRelevance: false,
  compareVariant: null,
};

type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState;
  private listeners = new Set<Listener>();

  constructor(state: ViewState = initialState) {
    this.state = { ...state };
  }

  get(): ViewState {
    return this.state;
  }

  update(patch: Partial<ViewState>): ViewState {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }
}

/**
 * Generation counter per request channel: responses arriving after a newer
 * request was issued are discarded instead of clobbering fresh views.
 */
export class RequestGate {
  private generation = 0;

  begin(): number {
    return ++this.generation;
  }

  accept(token: number): boolean {
    return token === this.generation;
  }
}

export type { Band };
