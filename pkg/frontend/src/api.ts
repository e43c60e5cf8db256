// Typed client for the safedialog HTTP service. All errors surface as
// ApiError carrying the server's {code, message, detail} body when present.

export interface TurnDto {
  index: number;
  speaker: "agent" | "user";
  text: string;
  sdrt?: string;
}

export interface SessionDto {
  session_id: string;
  status: string;
  idle?: boolean;
  turns?: TurnDto[];
  first_turn?: string;
}

export interface MessageReplyDto {
  turn_index: number;
  agent_text: string;
  sdrt: string | null;
}

export interface QueueItemDto {
  record_id: string;
  violation_text: string;
  image_uri: string;
  status: string;
}

export interface DecisionReplyDto {
  record_id: string;
  status: string;
  effective_text: string;
}

export interface IterationLogEntryDto {
  iteration: number;
  picks: Record<string, string>;
  scores_summary: { min: number; max: number; mean: number };
  learner_version: number;
  keyword_coverage?: number;
}

export interface LoopStateDto {
  iteration: number;
  remaining_budget: number;
  labeled_count: number;
  per_iteration_log: IterationLogEntryDto[];
}

export interface LoopJobDto {
  job_id: string;
  status: "running" | "done" | "failed";
  error: string;
  state: Partial<LoopStateDto>;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly detail: string = "",
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string | null = null,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "content-type": "application/json" };
    if (this.token) h["x-auth-token"] = this.token;
    return h;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let parsed: unknown = null;
    try {
      parsed = await resp.json();
    } catch {
      /* non-JSON body: leave parsed null */
    }
    if (!resp.ok) {
      const e = (parsed ?? {}) as Record<string, string>;
      throw new ApiError(
        resp.status,
        e.code ?? "http_error",
        e.message ?? `HTTP ${resp.status}`,
        e.detail ?? "",
      );
    }
    return parsed as T;
  }

  startSession(imageBase64: string, title = ""): Promise<SessionDto> {
    return this.request("POST", "/sessions", { image: imageBase64, title });
  }

  getSession(sessionId: string): Promise<SessionDto> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  sendMessage(sessionId: string, text: string): Promise<MessageReplyDto> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { text });
  }

  closeSession(sessionId: string): Promise<SessionDto> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }

  async getQueue(): Promise<QueueItemDto[]> {
    const body = await this.request<{ items: QueueItemDto[] }>(
      "GET",
      "/annotations/queue",
    );
    return body.items;
  }

  decide(
    recordId: string,
    decision: "correct" | "edit" | "discard",
    editedText?: string,
  ): Promise<DecisionReplyDto> {
    return this.request("POST", `/annotations/${recordId}`, {
      decision,
      edited_text: editedText ?? null,
    });
  }

  startLoop(config: Record<string, unknown>): Promise<{ job_id: string }> {
    return this.request("POST", "/loop/run", config);
  }

  getLoopJob(jobId: string): Promise<LoopJobDto> {
    return this.request("GET", `/loop/${jobId}`);
  }
}
