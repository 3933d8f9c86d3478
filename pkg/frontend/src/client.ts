/** Thin typed client over the run-store HTTP API. */

import type {
  EdaResponse,
  HealthResponse,
  ImportanceResponse,
  PredictionsResponse,
  RunRecord,
  SubmitResponse,
  WhatIfExclusions,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, body.detail ?? body);
  }
  return body as T;
}

export interface ImportanceQuery {
  score?: string;
  from?: number;
  to?: number;
  selector?: string;
  topK?: number;
}

export interface PredictionsQuery {
  lines?: string[];
  cumulative?: boolean;
  from?: number;
  to?: number;
}

export class WorkbenchClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string, params: Record<string, unknown> = {}): string {
    const u = new URL(path, this.baseUrl);
    for (const [k, v] of Object.entries(params)) {
      if (v !== undefined && v !== null) u.searchParams.set(k, String(v));
    }
    return u.toString();
  }

  async health(): Promise<HealthResponse> {
    return asJson(await fetch(this.url('/health')));
  }

  async submitRun(config: Record<string, unknown>): Promise<string> {
    const resp = await fetch(this.url('/runs'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ config }),
    });
    return (await asJson<SubmitResponse>(resp)).run_id;
  }

  async submitWhatIf(
    baseRun: string,
    exclude: WhatIfExclusions,
  ): Promise<string> {
    const resp = await fetch(this.url('/runs'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ base_run: baseRun, exclude }),
    });
    return (await asJson<SubmitResponse>(resp)).run_id;
  }

  async getRun(runId: string): Promise<RunRecord> {
    const body = await asJson<{ run: RunRecord }>(
      await fetch(this.url(`/runs/${runId}`)),
    );
    return body.run;
  }

  async listRuns(): Promise<RunRecord[]> {
    const body = await asJson<{ runs: RunRecord[] }>(
      await fetch(this.url('/runs')),
    );
    return body.runs;
  }

  /** Poll until the run reaches a terminal state. */
  async waitForRun(
    runId: string,
    timeoutMs = 120_000,
    pollMs = 250,
  ): Promise<RunRecord> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const record = await this.getRun(runId);
      if (record.state === 'done' || record.state === 'failed') return record;
      if (Date.now() > deadline) {
        throw new Error(`run ${runId} still ${record.state} after timeout`);
      }
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }

  async predictions(
    runId: string,
    query: PredictionsQuery = {},
  ): Promise<PredictionsResponse> {
    return asJson(
      await fetch(
        this.url(`/runs/${runId}/predictions`, {
          lines: query.lines?.join(','),
          cumulative: query.cumulative,
          from: query.from,
          to: query.to,
        }),
      ),
    );
  }

  async importance(
    runId: string,
    query: ImportanceQuery = {},
  ): Promise<ImportanceResponse> {
    return asJson(
      await fetch(
        this.url(`/runs/${runId}/importance`, {
          score: query.score,
          from: query.from,
          to: query.to,
          selector: query.selector,
          top_k: query.topK,
        }),
      ),
    );
  }

  async eda(
    runId: string,
    variables: string[],
    opts: { from?: number; to?: number; bins?: number } = {},
  ): Promise<EdaResponse> {
    const resp = await fetch(this.url('/eda'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ run_id: runId, variables, ...opts }),
    });
    return asJson(resp);
  }
}
