// Typed client over the review service HTTP API. All mutations go through
// resolvePending; the UI never originates a trading action on its own.

export interface Metrics {
  cr_pct: number;
  ar_pct: number;
  sharpe: number | null;
  mdd_pct: number;
}

export interface RunSummary {
  run_id: string;
  metrics: Metrics;
}

export interface RunDetail {
  run_id: string;
  config?: unknown;
  metrics?: Metrics;
  report_dates: string[];
}

export interface ProposedDecision {
  ticker: string;
  date: string;
  action: string;
  rationale_ref: string;
}

export interface Resolution {
  action: string;
  operator_id: string;
  note: string;
  resolved_at: string;
  kind: string;
}

export interface PendingItem {
  id: string;
  run_id: string;
  ticker: string;
  date: string;
  proposed: ProposedDecision;
  status: string;
  resolution?: Resolution;
}

export type ResolveBody =
  | { action: "approve"; operator_id: string }
  | { action: "override"; new_action: string; note: string; operator_id: string };

/** Server-reported error ({code, message} with an HTTP status). */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

/** Transport-level failure: service unreachable, DNS, aborted, ... */
export class NetworkError extends Error {}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new NetworkError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let code = "error";
      let message = `HTTP ${response.status}`;
      try {
        const body = await response.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(response.status, code, message);
    }
    return response;
  }

  async listRuns(): Promise<RunSummary[]> {
    const body = await (await this.request("/runs")).json();
    return body.runs;
  }

  async getRun(runId: string): Promise<RunDetail> {
    return (await this.request(`/runs/${encodeURIComponent(runId)}`)).json();
  }

  async getEquityCsv(runId: string): Promise<string> {
    return (await this.request(`/runs/${encodeURIComponent(runId)}/equity`)).text();
  }

  async getSignalsCsv(runId: string): Promise<string> {
    return (await this.request(`/runs/${encodeURIComponent(runId)}/signals`)).text();
  }

  async getReport(runId: string, date: string): Promise<string> {
    return (
      await this.request(`/runs/${encodeURIComponent(runId)}/reports/${encodeURIComponent(date)}`)
    ).text();
  }

  async listPending(): Promise<PendingItem[]> {
    const body = await (await this.request("/pending")).json();
    return body.pending;
  }

  async resolvePending(id: string, body: ResolveBody): Promise<PendingItem> {
    const response = await this.request(`/pending/${encodeURIComponent(id)}/resolve`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return response.json();
  }
}
