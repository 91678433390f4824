/** Typed client for the /api/v1 diagnostics service. */

import type {
  Band,
  ComparePayload,
  ConfusionPayload,
  DatasetInfo,
  HierarchyPayload,
  JobTicket,
  RelevancePayload,
  ResponseMapPayload,
  SamplesPayload,
} from './types.js';

export interface ConfusionQuery {
  order?: string; // 'hierarchy' | 'job:<id>'
  minCell?: number;
  topk?: number;
  predProbLo?: number;
  predProbHi?: number;
  actProbLo?: number;
  actProbHi?: number;
  diag?: boolean;
  blocks?: number;
}

export interface ResponseMapQuery {
  set?: string;
  threshold?: number;
  dsH?: number;
  dsW?: number;
  orderByGroup?: number;
}

export class ApiClient {
  constructor(readonly baseUrl: string = '') {}

  private async get<T>(path: string, params?: Record<string, unknown>): Promise<T> {
    const url = new URL(`${this.baseUrl}${path}`, globalThis.location?.href ?? 'http://localhost/');
    for (const [key, value] of Object.entries(params ?? {})) {
      if (value !== undefined && value !== null) url.searchParams.set(key, String(value));
    }
    const resp = await fetch(url);
    if (!resp.ok) {
      throw new Error(`GET ${url.pathname}${url.search} -> ${resp.status}: ${await resp.text()}`);
    }
    return resp.json() as Promise<T>;
  }

  listDatasets(): Promise<{ datasets: DatasetInfo[] }> {
    return this.get('/api/v1/datasets');
  }

  hierarchy(dataset: string, metric?: string, set?: string): Promise<HierarchyPayload> {
    return this.get(`/api/v1/datasets/${dataset}/hierarchy`, { metric, set });
  }

  confusion(dataset: string, set: string, query: ConfusionQuery = {}): Promise<ConfusionPayload> {
    return this.get(`/api/v1/datasets/${dataset}/sets/${set}/confusion`, { ...query });
  }

  responseMap(dataset: string, layer: string, query: ResponseMapQuery = {}): Promise<ResponseMapPayload> {
    const { orderByGroup, ...rest } = query;
    const params: Record<string, unknown> = { ...rest };
    if (orderByGroup !== undefined) params.orderBy = `relevance:${orderByGroup}`;
    return this.get(`/api/v1/datasets/${dataset}/layers/${layer}/responsemap`, params);
  }

  relevance(dataset: string, layer: string, group: number, set?: string): Promise<RelevancePayload> {
    return this.get(`/api/v1/datasets/${dataset}/layers/${layer}/relevance`, { group, set });
  }

  bandSamples(dataset: string, set: string, group: number, band: Band,
              groupByClass = false): Promise<SamplesPayload> {
    return this.get(`/api/v1/datasets/${dataset}/samples`,
                    { set, group, band, groupByClass: groupByClass || undefined });
  }

  expressionSamples(dataset: string, expr: string, groupByClass = false): Promise<SamplesPayload> {
    return this.get(`/api/v1/datasets/${dataset}/samples`,
                    { expr, groupByClass: groupByClass || undefined });
  }

  compare(dataset: string, base: string, variant: string, metric: string): Promise<ComparePayload> {
    return this.get(`/api/v1/datasets/${dataset}/compare`, { base, variant, metric });
  }

  async submitJob(dataset: string, kind: string, params: Record<string, unknown>): Promise<JobTicket> {
    const resp = await fetch(`${this.baseUrl}/api/v1/datasets/${dataset}/jobs`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ kind, params }),
    });
    if (!resp.ok) throw new Error(`job submit failed: ${resp.status}`);
    return resp.json() as Promise<JobTicket>;
  }

  job(jobId: string): Promise<JobTicket> {
    return this.get(`/api/v1/jobs/${jobId}`);
  }

  jobResult<T>(jobId: string): Promise<T> {
    return this.get(`/api/v1/jobs/${jobId}/result`);
  }

  thumbnailUrl(dataset: string, sampleId: string): string {
    return `${this.baseUrl}/api/v1/datasets/${dataset}/thumbnails/${sampleId}`;
  }
}
