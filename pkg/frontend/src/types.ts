/** Payload shapes of the /api/v1 service, mirrored 1:1. */

export interface HierarchyNodePayload {
  group_id: number;
  label: string;
  size: number;
  value?: number | null;
  class_id?: number;
  children?: HierarchyNodePayload[];
}

export interface HierarchyPayload {
  dataset_id: string;
  set_id: string | null;
  metric: string | null;
  root: HierarchyNodePayload;
}

/** Sparse confusion cell: [row, col, count] in display positions. */
export type ConfusionCell = [number, number, number];

export interface ConfusionPayload {
  dataset_id: string;
  set_id: string;
  order: number[];
  n_selected: number;
  unknown_count: number;
  filters: {
    excludeDiagonal: boolean;
    minCell: number | null;
    topk: number | null;
    predProb: [number, number] | null;
    actProb: [number, number] | null;
  };
  cells: ConfusionCell[];
  partition: { boundaries: number[]; score: number } | null;
  class_accuracy: (number | null)[];
}

export interface NeuronPayload {
  neuron_id: number;
  shape: [number, number];
  relevance: number | 'inf' | null;
  profile: number[][];
  saturated?: [number, number][];
}

export interface ResponseMapPayload {
  dataset_id: string;
  set_id: string;
  layer_id: string;
  threshold: number | null;
  class_order: number[];
  defined: boolean[];
  neurons: NeuronPayload[];
}

export interface RelevancePayload {
  dataset_id: string;
  set_id: string;
  layer_id: string;
  group_id: number;
  neurons: { neuron_id: number; value: number | 'inf' }[];
}

export interface SampleEntry {
  sample_id: string;
  true: number;
  true_label: string;
  predicted: number;
  predicted_label: string;
  pred_prob: number;
  true_prob: number | null;
  top1_correct: boolean;
  top5_correct: boolean;
}

export interface SampleGroupEntry {
  class_id: number;
  label: string;
  count: number;
  representative: string;
}

export interface SamplesPayload {
  dataset_id: string;
  set_id: string;
  provenance: string;
  unknown_count: number;
  count: number;
  samples?: SampleEntry[];
  groups?: SampleGroupEntry[];
}

export interface CompareGroupEntry {
  group_id: number;
  label: string;
  base: number;
  variant: number;
  delta: number;
}

export interface ComparePayload {
  dataset_id: string;
  base: string;
  variant: string;
  metric: string;
  dropped: [number, number];
  groups: CompareGroupEntry[];
}

export interface JobTicket {
  job_id: string;
  kind: string;
  state: 'queued' | 'running' | 'done' | 'failed' | 'cancelled';
  progress: number;
  cache_hit: boolean;
  result_location: string | null;
  error: string | null;
}

export interface DatasetInfo {
  dataset_id: string;
  n_classes: number;
  sets: string[];
  layers: string[];
}

export type Band = 'tp' | 'fp' | 'fn';
