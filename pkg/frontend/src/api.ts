/**
 * Typed client for the review-service HTTP+JSON API.
 *
 * The only mutating calls the UI ever makes are decisions and apply;
 * everything else is a read. Both the base URL and the fetch
 * implementation are injectable so tests can run against a stub or a
 * locally spawned service.
 */

export type Verdict = "accept" | "reject" | "modify";
export type ItemStatus = "Proposed" | "Accepted" | "Rejected" | "Modified";

export interface SessionSummary {
  id: string;
  mode: "interactive" | "auto";
  project_key: string;
  issue_count: number;
  threshold: number;
  candidate_count: number;
  suggestion_count: number;
  started_at: string;
  applied_at: string | null;
  decision_count: number;
}

export interface MergeAction {
  kind: "MergeCluster";
  survivor: string;
  absorbed: string[];
  summary: string;
  description: string;
}

export interface CandidateRow {
  id: string;
  status: ItemStatus;
  pair: { a: string; b: string };
  a_summary: string;
  b_summary: string;
  score: number;
  proposed_action: MergeAction | null;
  edited_summary?: string;
  edited_description?: string;
}

export interface SuggestionRow {
  id: string;
  status: ItemStatus;
  summary: string;
  description: string;
  rationale: string;
  redundancy_score: number;
  edited_summary?: string;
  edited_description?: string;
}

export interface ApplyStep {
  target: string;
  operation: string;
  outcome: "applied" | "already-satisfied" | "failed";
  detail: string;
}

export interface Receipt {
  action: Record<string, unknown>;
  steps: ApplyStep[];
  created_keys: string[];
  ok: boolean;
}

export interface MetricsRow {
  Participant: string;
  TP: number;
  FP: number;
  FN: number;
  TN: number;
  Time: number;
  Precision: number;
  Recall: number;
  Accuracy: number;
  F1: number;
}

export interface Report {
  session: SessionSummary;
  time_seconds: number;
  receipts: Receipt[];
  predicted_pairs: [string, string][];
  metrics: MetricsRow | null;
}

export interface EditedPayload {
  summary: string;
  description: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class GroomerApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown = null;
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        throw new ApiError(response.status, "bad_response", `non-JSON response: ${text.slice(0, 120)}`);
      }
    }
    if (!response.ok) {
      const err = parsed as { error?: string; message?: string } | null;
      throw new ApiError(
        response.status,
        err?.error ?? "http_error",
        err?.message ?? `HTTP ${response.status}`,
      );
    }
    return parsed as T;
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request("GET", "/api/sessions");
  }

  createSession(mode: "interactive" | "auto", threshold?: number): Promise<SessionSummary> {
    const body: Record<string, unknown> = { mode };
    if (threshold !== undefined) body.threshold = threshold;
    return this.request("POST", "/api/sessions", body);
  }

  getSession(id: string): Promise<SessionSummary & { decision_log: unknown[] }> {
    return this.request("GET", `/api/sessions/${id}`);
  }

  getCandidates(id: string): Promise<CandidateRow[]> {
    return this.request("GET", `/api/sessions/${id}/candidates`);
  }

  getSuggestions(id: string): Promise<SuggestionRow[]> {
    return this.request("GET", `/api/sessions/${id}/suggestions`);
  }

  decide(
    id: string,
    target: string,
    verdict: Verdict,
    editedPayload?: EditedPayload,
  ): Promise<{ id: string; status: ItemStatus }> {
    const body: Record<string, unknown> = { target, verdict };
    if (editedPayload !== undefined) body.edited_payload = editedPayload;
    return this.request("POST", `/api/sessions/${id}/decisions`, body);
  }

  requestSuggestions(id: string, userPrompt = "", maxSuggestions = 5): Promise<SuggestionRow[]> {
    return this.request("POST", `/api/sessions/${id}/suggestions`, {
      user_prompt: userPrompt,
      max_suggestions: maxSuggestions,
    });
  }

  apply(id: string): Promise<Report> {
    return this.request("POST", `/api/sessions/${id}/apply`);
  }

  report(id: string): Promise<Report> {
    return this.request("GET", `/api/sessions/${id}/report`);
  }
}
