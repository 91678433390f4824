/** Application entry point: wires the four coordinated views to the API. */

import { ApiClient } from './api.js';
import { Coordinator } from './coordinator.js';
import { computeIcicleLayout, renderIcicle } from './icicle.js';
import { computeMatrixScene, drawMatrix } from './matrix.js';
import { computeResponseScene, drawResponseMap } from './responsemap.js';
import { renderSampleGrid } from './samples.js';
import { initialState, RequestGate, Store } from './state.js';
import type { Band } from './types.js';

// API origin defaults to same-origin; override with ?api=http://host:port
const apiBase = new URLSearchParams(globalThis.location?.search ?? '').get('api') ?? '';
const api = new ApiClient(apiBase);
const store = new Store(initialState);
const coordinator = new Coordinator(api, store);
const matrixGate = new RequestGate();
const responseGate = new RequestGate();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function refreshHierarchy(): Promise<void> {
  const { datasetId, setId } = store.get();
  if (!datasetId) return;
  const metric = (el<HTMLSelectElement>('metric-select')).value;
  const payload = await api.hierarchy(datasetId, metric || undefined,
                                      metric ? setId ?? undefined : undefined);
  const layout = computeIcicleLayout(payload, {
    totalHeight: el('matrix-panel').clientHeight || 640,
    sortChildren: 'none',
  });
  renderIcicle(el('hierarchy'), layout, 56, {
    onSelect: (groupId) => void onGroupSelected(groupId),
  });
}

async function refreshMatrix(): Promise<void> {
  const state = store.get();
  if (!state.datasetId || !state.setId) return;
  const token = matrixGate.begin();
  const payload = await api.confusion(state.datasetId, state.setId, {
    minCell: state.minCell ?? undefined,
    topk: state.topk ?? undefined,
    blocks: state.blocks ?? undefined,
  });
  if (!matrixGate.accept(token)) return;
  const n = payload.order.length;
  const canvas = el<HTMLCanvasElement>('matrix');
  const cellSize = Math.max(1, Math.floor(640 / n));
  canvas.width = n * cellSize;
  canvas.height = n * cellSize;
  const scene = computeMatrixScene(payload, {
    cellSize,
    halo: state.halo,
    logScale: state.logScale,
  });
  drawMatrix(canvas.getContext('2d')!, scene);
}

async function refreshResponseMap(): Promise<void> {
  const state = store.get();
  if (!state.datasetId || !state.setId || !state.layerId) return;
  const token = responseGate.begin();
  const payload = await api.responseMap(state.datasetId, state.layerId, {
    set: state.setId,
    threshold: state.threshold,
    orderByGroup: state.orderByRelevance && state.selectedGroup !== null
      ? state.selectedGroup : undefined,
  });
  if (!responseGate.accept(token)) return;
  const scene = computeResponseScene(payload, { rowHeight: 4, columnGap: 2 });
  const canvas = el<HTMLCanvasElement>('responsemap');
  const last = scene.columns[scene.columns.length - 1];
  canvas.width = last ? last.x + last.width : 0;
  canvas.height = scene.nRows * scene.rowHeight;
  drawResponseMap(canvas.getContext('2d')!, scene);
}

async function onGroupSelected(groupId: number): Promise<void> {
  const result = await coordinator.selectGroup(groupId);
  if (!result) return;
  const band = (el<HTMLSelectElement>('band-select').value || 'fn') as Band;
  const state = store.get();
  renderSampleGrid(el('samples'), result.grids[band],
                   (sid) => api.thumbnailUrl(state.datasetId!, sid));
  if (state.orderByRelevance) void refreshResponseMap();
}

async function boot(): Promise<void> {
  const { datasets } = await api.listDatasets();
  if (!datasets.length) {
    el('status').textContent = 'no datasets registered; POST /api/v1/datasets first';
    return;
  }
  const info = datasets[0];
  store.update({
    datasetId: info.dataset_id,
    setId: info.sets[0] ?? null,
    layerId: info.layers[0] ?? null,
  });
  el('status').textContent =
    `${info.dataset_id}: ${info.n_classes} classes, sets ${info.sets.join(', ')}`;

  el<HTMLSelectElement>('view-select').addEventListener('change', (e) => {
    const view = (e.target as HTMLSelectElement).value as 'matrix' | 'responsemap';
    store.update({ activeView: view });
    el('matrix-panel').style.display = view === 'matrix' ? '' : 'none';
    el('responsemap-panel').style.display = view === 'responsemap' ? '' : 'none';
    if (view === 'responsemap') void refreshResponseMap();
  });
  el<HTMLInputElement>('halo-toggle').addEventListener('change', (e) => {
    store.update({ halo: (e.target as HTMLInputElement).checked });
    void refreshMatrix();
  });
  el<HTMLInputElement>('log-toggle').addEventListener('change', (e) => {
    store.update({ logScale: (e.target as HTMLInputElement).checked });
    void refreshMatrix();
  });
  el<HTMLInputElement>('blocks-input').addEventListener('change', (e) => {
    const v = parseInt((e.target as HTMLInputElement).value, 10);
    store.update({ blocks: Number.isFinite(v) && v > 0 ? v : null });
    void refreshMatrix();
  });
  el<HTMLInputElement>('mincell-input').addEventListener('change', (e) => {
    const v = parseInt((e.target as HTMLInputElement).value, 10);
    store.update({ minCell: Number.isFinite(v) && v > 0 ? v : null });
    void refreshMatrix();
  });
  el<HTMLInputElement>('threshold-input').addEventListener('input', (e) => {
    store.update({ threshold: parseFloat((e.target as HTMLInputElement).value) || 0 });
    void refreshResponseMap();
  });
  el<HTMLInputElement>('relevance-toggle').addEventListener('change', (e) => {
    store.update({ orderByRelevance: (e.target as HTMLInputElement).checked });
    void refreshResponseMap();
  });
  el<HTMLSelectElement>('metric-select').addEventListener('change',
    () => void refreshHierarchy());

  await refreshHierarchy();
  await refreshMatrix();
}

boot().catch((err) => {
  el('status').textContent = String(err);
});
