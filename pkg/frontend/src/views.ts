/** Chart view-model builders.
 *
 * Pure functions from API payloads to render-ready structures, so every
 * invariant the charts rely on (fractions summing to one, cumulative series
 * matching the per-line sum, excluded features absent) is testable without
 * a browser.
 */

import type {
  Doughnut,
  EdaVariable,
  ImportanceResponse,
  PredictionsResponse,
} from './types.js';

export interface DoughnutViewModel {
  name: string;
  segments: { label: string; value: number; fraction: number }[];
}

/** Validate and convert the importance doughnuts; throws when any
 * doughnut's fractions do not sum to 1 within the tolerance. */
export function buildDoughnuts(
  payload: ImportanceResponse,
  tolerance = 1e-9,
): DoughnutViewModel[] {
  return payload.doughnuts.map((d: Doughnut) => {
    let total = 0;
    for (const seg of d.segments) {
      if (seg.fraction < 0) {
        throw new Error(`doughnut ${d.name}: negative fraction`);
      }
      total += seg.fraction;
    }
    if (Math.abs(total - 1) > tolerance) {
      throw new Error(
        `doughnut ${d.name}: fractions sum to ${total}, expected 1`,
      );
    }
    return {
      name: d.name,
      segments: d.segments.map((s) => ({
        label: s.category,
        value: s.score,
        fraction: s.fraction,
      })),
    };
  });
}

/** Every feature name appearing anywhere in the importance payload. */
export function featuresInImportance(payload: ImportanceResponse): Set<string> {
  const out = new Set<string>();
  for (const entry of payload.top_features.aggregate) out.add(entry.feature);
  for (const entries of Object.values(payload.top_features.per_target)) {
    for (const entry of entries) out.add(entry.feature);
  }
  for (const entries of Object.values(payload.category_pies)) {
    for (const entry of entries) out.add(entry.feature);
  }
  return out;
}

export interface LineSeries {
  label: string;
  t: number[];
  values: number[];
}

export interface PredictionChartModel {
  lines: LineSeries[];
  errors: LineSeries[];
  cumulative: LineSeries | null;
}

/** Per-line prediction series plus optional error and cumulative series. */
export function buildPredictionChart(
  payload: PredictionsResponse,
): PredictionChartModel {
  const lines: LineSeries[] = payload.series.map((s) => ({
    label: s.target,
    t: s.t,
    values: s.predicted,
  }));
  const errors: LineSeries[] = [];
  for (const s of payload.series) {
    if (s.abs_error) {
      errors.push({
        label: s.target,
        t: s.t,
        values: s.abs_error.map((e) => (e === null ? NaN : e)),
      });
    }
  }
  const cumulative = payload.cumulative_series
    ? {
        label: 'cumulative',
        t: payload.cumulative_series.t,
        values: payload.cumulative_series.predicted,
      }
    : null;
  return { lines, errors, cumulative };
}

/** Pointwise sum of the per-line predicted series. */
export function sumOfSeries(payload: PredictionsResponse): number[] {
  if (payload.series.length === 0) return [];
  const n = payload.series[0].t.length;
  const out = new Array<number>(n).fill(0);
  for (const s of payload.series) {
    if (s.predicted.length !== n) {
      throw new Error(`series ${s.target}: length mismatch`);
    }
    for (let i = 0; i < n; i++) out[i] += s.predicted[i];
  }
  return out;
}

/** Largest absolute gap between the served cumulative series and the
 * pointwise sum of the per-line series. */
export function cumulativeMismatch(payload: PredictionsResponse): number {
  if (!payload.cumulative_series) {
    throw new Error('payload has no cumulative series');
  }
  const sums = sumOfSeries(payload);
  const served = payload.cumulative_series.predicted;
  if (served.length !== sums.length) return Infinity;
  let worst = 0;
  for (let i = 0; i < sums.length; i++) {
    worst = Math.max(worst, Math.abs(served[i] - sums[i]));
  }
  return worst;
}

export interface BoxplotModel {
  whiskerLow: number;
  boxLow: number;
  median: number;
  boxHigh: number;
  whiskerHigh: number;
  outliers: number[];
}

export interface HistogramModel {
  bins: { x0: number; x1: number; count: number }[];
}

export function buildEdaModels(variable: EdaVariable): {
  boxplot: BoxplotModel | null;
  histogram: HistogramModel | null;
} {
  const boxplot = variable.boxplot
    ? {
        whiskerLow: variable.boxplot.min,
        boxLow: variable.boxplot.q1,
        median: variable.boxplot.median,
        boxHigh: variable.boxplot.q3,
        whiskerHigh: variable.boxplot.max,
        outliers: variable.boxplot.outliers,
      }
    : null;
  const histogram = variable.histogram
    ? {
        bins: variable.histogram.counts.map((count, i) => ({
          x0: variable.histogram!.bin_edges[i],
          x1: variable.histogram!.bin_edges[i + 1],
          count,
        })),
      }
    : null;
  return { boxplot, histogram };
}
