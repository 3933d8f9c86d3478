/** Payload types for the run-store HTTP API (schema_version 1). */

export interface HealthResponse {
  schema_version: number;
  status: string;
}

export interface RunRecord {
  run_id: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  config: Record<string, unknown>;
  parent: string | null;
  error: string | null;
  summary: RunSummary | null;
  created: number;
  started: number | null;
  finished: number | null;
}

export interface RunSummary {
  config: Record<string, unknown>;
  metrics: MetricReport;
  dataset_digest: string;
  model_digest: string;
  metafile_sha256: string;
  artifacts: Record<string, string>;
}

export interface MetricReport {
  per_target: Record<string, TargetMetrics>;
  overall_rmse: number | null;
  overall_mae: number | null;
}

export interface TargetMetrics {
  rmse: number | null;
  mae: number | null;
  count: number;
}

export interface SubmitResponse {
  schema_version: number;
  run_id: string;
}

export interface PredictionSeries {
  target: string;
  t: number[];
  predicted: number[];
  true?: (number | null)[];
  abs_error?: (number | null)[];
}

export interface PredictionsResponse {
  schema_version: number;
  run_id: string;
  cumulative: boolean;
  series: PredictionSeries[];
  cumulative_series?: { t: number[]; predicted: number[] };
}

export interface DoughnutSegment {
  category: string;
  score: number;
  fraction: number;
}

export interface Doughnut {
  name: string;
  segments: DoughnutSegment[];
}

export interface TopFeatureEntry {
  feature: string;
  score: number;
}

export interface ImportanceResponse {
  schema_version: number;
  run_id: string;
  score: string;
  subset: Record<string, unknown>;
  doughnuts: Doughnut[];
  top_features: {
    aggregate: TopFeatureEntry[];
    per_target: Record<string, TopFeatureEntry[]>;
  };
  category_pies: Record<string, TopFeatureEntry[]>;
  category_rollup: {
    aggregate: Record<string, number>;
    per_target: Record<string, Record<string, number>>;
  };
}

export interface EdaVariable {
  count: number;
  histogram: { bin_edges: number[]; counts: number[] } | null;
  boxplot: {
    min: number;
    q1: number;
    median: number;
    q3: number;
    max: number;
    outliers: number[];
  } | null;
}

export interface EdaResponse {
  schema_version: number;
  variables: Record<string, EdaVariable>;
}

export interface WhatIfExclusions {
  excluded_features?: string[];
  excluded_intervals?: [number, number][];
}
