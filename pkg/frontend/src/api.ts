/**
 * Typed client for the control-loop service. Every call is appended to a
 * request log so tests can trace each rendered list back to exactly one
 * API response.
 */

export interface RecommendationRow {
  rank: number;
  item_id: number;
  name: string;
  score: number;
}

export interface HistoryEntry {
  position: number;
  item_id: number;
  name: string;
  revoked: boolean;
}

export interface SessionState {
  schema_version: number;
  session_id: string;
  user_id: number;
  history: HistoryEntry[];
  pending_item: number | null;
  recommendations: RecommendationRow[];
}

export interface RevocableBehavior {
  position: number;
  item_id: number;
  name: string;
}

export interface ExplanationPayload {
  schema_version: number;
  item_id: number;
  method: string;
  status: "success" | "failure";
  revocable: RevocableBehavior[];
  iterations: number;
  text: string;
  reason: string | null;
}

export interface AddedItem {
  item_id: number;
  name: string;
}

export interface InteractPayload {
  schema_version: number;
  pending_item: number;
  added_items: AddedItem[];
  text: string;
}

export interface RecommendationsPayload {
  schema_version: number;
  recommendations: RecommendationRow[];
}

export class ApiFailure extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface LoggedRequest {
  method: string;
  path: string;
  status: number;
}

type FetchLike = typeof fetch;

export class ApiClient {
  readonly requestLog: LoggedRequest[] = [];

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      this.requestLog.push({ method, path, status: 0 });
      throw new ApiFailure(0, "unreachable", String(err));
    }
    this.requestLog.push({ method, path, status: resp.status });
    const payload = await resp.json();
    if (!resp.ok) {
      const code = typeof payload?.code === "string" ? payload.code : "error";
      const message =
        typeof payload?.message === "string" ? payload.message : resp.statusText;
      throw new ApiFailure(resp.status, code, message);
    }
    return payload as T;
  }

  createSession(userId: number): Promise<SessionState> {
    return this.call("POST", "/sessions", { user_id: userId });
  }

  sessionState(sessionId: string): Promise<SessionState> {
    return this.call("GET", `/sessions/${sessionId}`);
  }

  recommendations(sessionId: string): Promise<RecommendationsPayload> {
    return this.call("GET", `/sessions/${sessionId}/recommendations`);
  }

  explanation(
    sessionId: string,
    itemId: number,
    method: string,
  ): Promise<ExplanationPayload> {
    return this.call(
      "GET",
      `/sessions/${sessionId}/explanations/${itemId}?method=${encodeURIComponent(method)}`,
    );
  }

  revoke(sessionId: string, positions: number[]): Promise<RecommendationsPayload> {
    return this.call("POST", `/sessions/${sessionId}/revoke`, { positions });
  }

  interact(sessionId: string, itemId: number): Promise<InteractPayload> {
    return this.call("POST", `/sessions/${sessionId}/interact`, { item_id: itemId });
  }

  confirm(sessionId: string): Promise<RecommendationsPayload> {
    return this.call("POST", `/sessions/${sessionId}/confirm`);
  }

  undo(sessionId: string): Promise<RecommendationsPayload> {
    return this.call("POST", `/sessions/${sessionId}/undo`);
  }

  health(): Promise<{ status: string }> {
    return this.call("GET", "/healthz");
  }
}
