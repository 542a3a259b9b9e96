/** Typed client for the averaging session service. */

export interface VariableView {
  name: string;
  values: string[] | null;
  description: string | null;
}

export interface QueryView {
  query_id: number;
  kind: "existence" | "orientation";
  x: VariableView;
  y: VariableView;
  connection_count?: number;
  n_models?: number;
  connection_share?: number;
  oriented_share_xy?: number;
  oriented_share_yx?: number;
}

export interface HistoryEntry {
  query_id: number;
  kind: string;
  pair: string[];
  answer: Record<string, unknown>;
  timestamp: number;
}

export interface PendingResponse {
  session_id: string;
  status: string;
  query: QueryView | null;
  history: HistoryEntry[];
}

export interface ResultResponse {
  session_id: string;
  status: string;
  graph: { variables: unknown[]; edges: [string, string, string][] };
  metrics: Record<string, unknown> | null;
  trace: Record<string, unknown>;
  expert_calls: Record<string, number>;
}

export type AnswerChoice =
  | { accept: boolean }
  | { parent: string; child: string };

export type SubmitOutcome = "accepted" | "conflict" | "rejected";

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = globalThis.fetch.bind(globalThis),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(payload: Record<string, unknown>): Promise<string> {
    const response = await this.fetchImpl(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) {
      throw new Error(`session creation failed: HTTP ${response.status}`);
    }
    const body = (await response.json()) as { session_id: string };
    return body.session_id;
  }

  async getPending(sessionId: string): Promise<PendingResponse> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/pending`));
    if (!response.ok) {
      throw new Error(`pending poll failed: HTTP ${response.status}`);
    }
    return (await response.json()) as PendingResponse;
  }

  async submitAnswer(
    sessionId: string,
    queryId: number,
    choice: AnswerChoice,
  ): Promise<SubmitOutcome> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/answer`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query_id: queryId, ...choice }),
    });
    if (response.ok) {
      return "accepted";
    }
    if (response.status === 409) {
      return "conflict";
    }
    return "rejected";
  }

  async getResult(sessionId: string): Promise<ResultResponse> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/result`));
    if (!response.ok) {
      throw new Error(`result fetch failed: HTTP ${response.status}`);
    }
    return (await response.json()) as ResultResponse;
  }
}
