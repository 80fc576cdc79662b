/**
 * Typed client for the annotation service. Every write the console performs
 * goes through this module and therefore through the published endpoints;
 * the fetch function is injected so tests can stub the server contract.
 */

export type SessionMode = "icl" | "no_icl";
export type Verdict = "correct" | "incorrect";

export interface ActionJson {
  pre: string;
  motion: string;
  preposition: string;
  object: string | null;
  post: string;
}

export interface SessionPayload {
  instruction: string;
  used_demo: boolean;
  stages: Record<string, string>;
  final: ActionJson[] | null;
  failure: { stage: string; error: string } | null;
  stale_stages: number[];
  no_demo_available: boolean;
}

export interface TaskPayload {
  id: string;
  instruction: string;
  scene_ref: string;
  version: number;
  status: "pending" | "verified" | "rejected";
  votes: { verdict: Verdict; annotator: string; timestamp: number }[];
  voted_session: SessionMode | null;
  sessions: { icl: SessionPayload | null; no_icl: SessionPayload | null };
  committed: "added" | "skipped" | null;
  record_id: number | null;
}

export interface SimilarityScores {
  object_similarity: number;
  sequence_similarity: number;
}

export interface CommitResult {
  decision: "add" | "skip";
  scores: Record<string, SimilarityScores>;
  record_id: number | null;
  version: number;
}

export interface ApiError {
  status: number;
  code: string;
  message: string;
}

export class RequestFailed extends Error {
  constructor(public readonly error: ApiError) {
    super(`${error.code}: ${error.message}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init)
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const payload = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      const err = (payload.error ?? {}) as { code?: string; message?: string };
      throw new RequestFailed({
        status: response.status,
        code: err.code ?? "unknown_error",
        message: err.message ?? response.statusText,
      });
    }
    return payload as T;
  }

  listScenes(): Promise<{ scenes: string[] }> {
    return this.request("GET", "/scenes");
  }

  listTasks(): Promise<{ tasks: TaskPayload[] }> {
    return this.request("GET", "/tasks");
  }

  getTask(id: string): Promise<{ task: TaskPayload }> {
    return this.request("GET", `/tasks/${id}`);
  }

  createTask(instruction: string, sceneRef: string): Promise<{ task: TaskPayload }> {
    return this.request("POST", "/tasks", { instruction, scene_ref: sceneRef });
  }

  plan(
    id: string,
    mode: SessionMode | "both"
  ): Promise<{ sessions: Partial<Record<SessionMode, SessionPayload>>; version: number }> {
    return this.request("POST", `/tasks/${id}/plan`, { mode });
  }

  editStage(
    id: string,
    stage: number,
    text: string,
    version: number,
    session: SessionMode
  ): Promise<{ session: SessionPayload; version: number }> {
    return this.request("PUT", `/tasks/${id}/stages/${stage}`, { text, version, session });
  }

  vote(
    id: string,
    verdict: Verdict,
    annotator: string,
    session: SessionMode
  ): Promise<{ status: TaskPayload["status"]; version: number }> {
    return this.request("POST", `/tasks/${id}/vote`, { verdict, annotator, session });
  }

  commit(id: string): Promise<CommitResult> {
    return this.request("POST", `/tasks/${id}/commit`);
  }
}
